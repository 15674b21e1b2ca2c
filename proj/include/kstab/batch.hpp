#pragma once

// Bulk classification of PALP databases. A single reader fills a window of
// records, a worker pool classifies the window, and results are written in
// input order before the next window is read. The window bounds memory and
// gives back-pressure; output does not depend on the number of workers.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "kstab/palp.hpp"
#include "kstab/toric_fano.hpp"

namespace kstab {

enum class BatchFormat { Csv, JsonLines };

struct BatchOptions {
  std::size_t jobs = 1;
  BatchFormat format = BatchFormat::Csv;
  bool strict = false;
  bool transpose = false;
  std::size_t window = 0;  // records per window; 0 picks 256 * jobs
};

struct BatchFailure {
  std::size_t index;  // 0-based record index
  std::size_t line;   // line offset reported by the parser or the record header
  ErrorCode code;
  std::string message;
};

struct BatchReport {
  std::size_t total = 0;
  std::size_t reflexive_count = 0;
  std::size_t polystable_count = 0;
  std::size_t unstable_count = 0;
  std::vector<BatchFailure> failures;
};

namespace detail {

/// Runs task(i) for i in [0, count) on up to `jobs` threads.
inline void parallel_indices(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : pool) t.join();
}

struct BatchItem {
  std::size_t index = 0;
  std::optional<PalpRecord> record;
  std::optional<Error> error;
  // filled by a worker
  std::size_t dim = 0, n_vertices = 0;
  bool parsed = false, reflexive = false;
  std::optional<StabilityVerdict> verdict;
  RatPoint barycenter;
};

inline void classify_item(BatchItem& item, bool transpose) {
  if (item.error) return;
  try {
    LatticePolytope p = item.record->polytope(transpose);
    item.parsed = true;
    item.dim = p.dim();
    item.n_vertices = p.vertices().size();
    item.reflexive = is_reflexive(p);
    if (!item.reflexive) {
      item.barycenter = barycenter(p);
      throw Error(ErrorCode::NotReflexive, "record is not reflexive", item.record->source_line);
    }
    item.verdict = decide_kps(from_polytope(std::move(p)));
    item.barycenter = item.verdict->barycenter;
  } catch (const Error& e) {
    item.error = e;
  }
}

inline std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += c;
    } else if (static_cast<unsigned char>(c) < 0x20) {
      out += ' ';
    } else {
      out += c;
    }
  }
  return out;
}

inline void write_item(std::ostream& out, const BatchItem& it, BatchFormat format) {
  std::string bary;
  for (std::size_t i = 0; i < it.barycenter.size(); ++i) bary += (i ? " " : "") + to_string(it.barycenter[i]);
  const std::string verdict = it.error ? to_string(it.error->code()) : to_string(it.verdict->status);
  if (format == BatchFormat::Csv) {
    out << it.index << ',';
    if (it.parsed) out << it.dim << ',' << it.n_vertices << ',' << (it.reflexive ? 1 : 0);
    else out << ",,";
    out << ',' << bary << ',' << verdict << '\n';
    return;
  }
  out << "{\"index\":" << it.index;
  if (it.parsed) {
    out << ",\"dim\":" << it.dim << ",\"n_vertices\":" << it.n_vertices
        << ",\"reflexive\":" << (it.reflexive ? "true" : "false") << ",\"barycenter\":[";
    for (std::size_t i = 0; i < it.barycenter.size(); ++i) out << (i ? "," : "") << '"' << to_string(it.barycenter[i]) << '"';
    out << ']';
  }
  out << ",\"verdict\":\"" << verdict << '"';
  if (it.error) out << ",\"error\":\"" << json_escape(it.error->what()) << '"';
  out << "}\n";
}

}  // namespace detail

inline const char* batch_csv_header() { return "index,dim,n_vertices,reflexive,barycenter,verdict\n"; }

/// Classifies every record of `src`, writing one verdict line per record to
/// `out` (CSV with a header row, or JSON lines). Lenient mode records
/// failures and continues; strict mode writes everything before the failing
/// record and rethrows its error.
inline BatchReport batch_classify(LineSource& src, std::ostream& out, const BatchOptions& opt = {}) {
  const std::size_t jobs = std::max<std::size_t>(1, opt.jobs);
  const std::size_t window = opt.window ? opt.window : 256 * jobs;
  PalpReader reader(src);
  BatchReport report;
  if (opt.format == BatchFormat::Csv) out << batch_csv_header();

  std::vector<detail::BatchItem> items;
  items.reserve(window);
  bool done = false;
  while (!done) {
    items.clear();
    while (items.size() < window) {
      detail::BatchItem it;
      it.index = report.total + items.size();
      try {
        it.record = reader.next();
        if (!it.record) {
          done = true;
          break;
        }
      } catch (const Error& e) {
        it.error = e;
      }
      items.push_back(std::move(it));
    }
    detail::parallel_indices(items.size(), jobs, [&](std::size_t i) { detail::classify_item(items[i], opt.transpose); });

    for (auto& it : items) {
      ++report.total;
      if (it.error) {
        const std::size_t line = it.error->offset().value_or(it.record ? it.record->source_line : 0);
        if (opt.strict) {
          out.flush();
          throw *it.error;
        }
        report.failures.push_back({it.index, line, it.error->code(), it.error->what()});
      } else {
        ++report.reflexive_count;
        if (it.verdict->status == Stability::KPolystable) ++report.polystable_count;
        else ++report.unstable_count;
      }
      detail::write_item(out, it, opt.format);
    }
  }
  out.flush();
  return report;
}

}  // namespace kstab
