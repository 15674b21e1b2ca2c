#pragma once

// PALP text blocks: a header "A B [comment]" followed by an A x B integer
// matrix. If A <= B the rows are coordinates (A = dim, columns are
// vertices), otherwise the rows are vertices. Plain and gzip input are both
// read through zlib.

#include <cstdio>
#include <istream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <zlib.h>

#include "kstab/polytope.hpp"

namespace kstab {

class LineSource {
 public:
  virtual ~LineSource() = default;
  virtual bool getline(std::string& line) = 0;
};

class StreamLineSource : public LineSource {
 public:
  explicit StreamLineSource(std::istream& in) : in_(in) {}
  bool getline(std::string& line) override { return static_cast<bool>(std::getline(in_, line)); }

 private:
  std::istream& in_;
};

/// Reads plain or gzip-compressed files transparently.
class GzLineSource : public LineSource {
 public:
  explicit GzLineSource(const std::string& path) : file_(gzopen(path.c_str(), "rb")) {
    if (!file_) throw Error(ErrorCode::IoError, "cannot open " + path);
  }
  ~GzLineSource() override {
    if (file_) gzclose(file_);
  }
  GzLineSource(const GzLineSource&) = delete;
  GzLineSource& operator=(const GzLineSource&) = delete;

  bool getline(std::string& line) override {
    line.clear();
    char buf[4096];
    while (true) {
      if (!gzgets(file_, buf, sizeof buf)) return !line.empty();
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
    }
  }

 private:
  gzFile file_;
};

struct PalpRecord {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::vector<std::int64_t>> matrix;
  std::size_t source_line = 0;  // 1-based line of the header

  /// Vertex list after orientation; `transpose` flips the A <= B rule.
  std::vector<IntPoint> points(bool transpose = false) const {
    bool rows_are_coords = rows <= cols;
    if (transpose) rows_are_coords = !rows_are_coords;
    std::vector<IntPoint> pts;
    if (rows_are_coords) {
      for (std::size_t c = 0; c < cols; ++c) {
        IntPoint p;
        for (std::size_t r = 0; r < rows; ++r) p.push_back(matrix[r][c]);
        pts.push_back(std::move(p));
      }
    } else {
      pts = matrix;
    }
    return pts;
  }

  LatticePolytope polytope(bool transpose = false) const {
    auto pts = points(transpose);
    if (!pts.empty() && pts.front().size() > 4)
      throw Error(ErrorCode::DimensionUnsupported, "dimension above 4", source_line);
    try {
      return make_polytope(std::move(pts));
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), source_line);
    }
  }
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline std::optional<std::int64_t> parse_int(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  std::size_t i = (tok[0] == '-' || tok[0] == '+') ? 1 : 0;
  if (i == tok.size()) return std::nullopt;
  for (std::size_t j = i; j < tok.size(); ++j)
    if (tok[j] < '0' || tok[j] > '9') return std::nullopt;
  try {
    return std::stoll(tok);
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Streaming PALP reader: one record in memory at a time.
class PalpReader {
 public:
  explicit PalpReader(LineSource& src) : src_(src) {}

  /// Next record, nullopt at end of input. Throws Error (with line offset)
  /// on a malformed block; the rest of that block is consumed first so the
  /// caller can keep reading.
  std::optional<PalpRecord> next() {
    std::string line;
    std::vector<std::string> toks;
    do {
      if (!read(line)) return std::nullopt;
      toks = detail::split_ws(line);
    } while (toks.empty());

    const std::size_t header_line = line_no_;
    std::optional<std::int64_t> a, b;
    if (toks.size() >= 2) {
      a = detail::parse_int(toks[0]);
      b = detail::parse_int(toks[1]);
    }
    if (!a || !b || *a <= 0 || *b <= 0)
      throw Error(ErrorCode::MalformedHeader, "expected 'rows cols' header, got '" + line + "'", header_line);

    PalpRecord rec;
    rec.rows = static_cast<std::size_t>(*a);
    rec.cols = static_cast<std::size_t>(*b);
    rec.source_line = header_line;
    std::optional<Error> failure;
    while (rec.matrix.size() < rec.rows) {
      if (!read(line)) {
        throw Error(ErrorCode::MatrixShapeMismatch,
                    "block ends after " + std::to_string(rec.matrix.size()) + " of " + std::to_string(rec.rows) + " rows",
                    header_line);
      }
      toks = detail::split_ws(line);
      if (toks.empty()) continue;
      std::vector<std::int64_t> row;
      for (std::size_t i = 0; i < toks.size() && i < rec.cols; ++i) {
        auto v = detail::parse_int(toks[i]);
        if (!v) {
          if (!failure) failure = Error(ErrorCode::NonIntegerEntry, "'" + toks[i] + "' is not an integer", line_no_);
          break;
        }
        row.push_back(*v);
      }
      const bool numeric_tail = toks.size() > rec.cols && detail::parse_int(toks[rec.cols]).has_value();
      if (!failure && (row.size() != rec.cols || numeric_tail)) {
        failure = Error(ErrorCode::MatrixShapeMismatch,
                        "row has " + std::to_string(toks.size()) + " entries, expected " + std::to_string(rec.cols),
                        line_no_);
      }
      rec.matrix.push_back(std::move(row));
    }
    if (failure) throw *failure;
    return rec;
  }

  std::size_t line() const { return line_no_; }

 private:
  bool read(std::string& line) {
    if (!src_.getline(line)) return false;
    ++line_no_;
    return true;
  }

  LineSource& src_;
  std::size_t line_no_ = 0;
};

/// PALP block with one vertex per row.
inline std::string to_palp(const LatticePolytope& p) {
  std::ostringstream out;
  out << p.vertices().size() << ' ' << p.dim() << '\n';
  for (const auto& v : p.vertices()) {
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
    out << '\n';
  }
  return out.str();
}

}  // namespace kstab
