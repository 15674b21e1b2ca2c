#pragma once

#include <algorithm>
#include <vector>

#include "kstab/polytope.hpp"

namespace kstab {

/// y -> <gradient, y> + constant.
struct AffineFn {
  RatPoint gradient;
  BigRational constant;

  BigRational operator()(const RatPoint& y) const {
    BigRational s = constant;
    for (std::size_t i = 0; i < y.size(); ++i) s += gradient[i] * y[i];
    return s;
  }
  double operator()(const std::vector<double>& y) const;

  AffineFn operator-(const AffineFn& o) const {
    AffineFn r{gradient, constant - o.constant};
    for (std::size_t i = 0; i < r.gradient.size(); ++i) r.gradient[i] -= o.gradient[i];
    return r;
  }

  bool operator==(const AffineFn&) const = default;
  bool operator<(const AffineFn& o) const {
    if (gradient != o.gradient) return gradient < o.gradient;
    return constant < o.constant;
  }
};

inline double AffineFn::operator()(const std::vector<double>& y) const {
  double s = to_double(constant);
  for (std::size_t i = 0; i < y.size(); ++i) s += to_double(gradient[i]) * y[i];
  return s;
}

inline AffineFn linear_fn(RatPoint gradient) {
  return AffineFn{std::move(gradient), BigRational(0)};
}

/// max over affine pieces. Pieces are kept sorted and deduplicated; use
/// restricted_to() to drop pieces that are nowhere maximal on a polytope.
class PLConvexFn {
 public:
  explicit PLConvexFn(std::vector<AffineFn> pieces) : pieces_(std::move(pieces)) {
    if (pieces_.empty()) throw Error(ErrorCode::FunctionUndefined, "PL function without pieces");
    const std::size_t n = pieces_.front().gradient.size();
    for (const auto& p : pieces_)
      if (p.gradient.size() != n) throw Error(ErrorCode::SchemaViolation, "pieces of mixed dimension");
    std::sort(pieces_.begin(), pieces_.end());
    pieces_.erase(std::unique(pieces_.begin(), pieces_.end()), pieces_.end());
  }
  PLConvexFn(AffineFn single) : PLConvexFn(std::vector<AffineFn>{std::move(single)}) {}

  std::size_t dim() const { return pieces_.front().gradient.size(); }
  const std::vector<AffineFn>& pieces() const { return pieces_; }

  BigRational operator()(const RatPoint& y) const {
    BigRational best = pieces_.front()(y);
    for (std::size_t i = 1; i < pieces_.size(); ++i) best = std::max(best, pieces_[i](y));
    return best;
  }

  PLConvexFn operator+(const AffineFn& l) const {
    std::vector<AffineFn> ps = pieces_;
    for (auto& p : ps) {
      p.constant += l.constant;
      for (std::size_t i = 0; i < p.gradient.size(); ++i) p.gradient[i] += l.gradient[i];
    }
    return PLConvexFn(std::move(ps));
  }

  PLConvexFn operator*(const BigRational& c) const {
    if (c <= 0) throw Error(ErrorCode::SchemaViolation, "PL functions scale by positive rationals only");
    std::vector<AffineFn> ps = pieces_;
    for (auto& p : ps) {
      p.constant *= c;
      for (auto& g : p.gradient) g *= c;
    }
    return PLConvexFn(std::move(ps));
  }

  /// Same function on `p`, keeping only pieces maximal on a full-dimensional
  /// part of it.
  PLConvexFn restricted_to(const LatticePolytope& p) const;

  bool operator==(const PLConvexFn&) const = default;

 private:
  std::vector<AffineFn> pieces_;
};

namespace detail {

/// Vertices of {y : <g_k, y> + h_k >= 0 for all k} in R^n, by solving every
/// n-subset of constraints. Fine for the handful of constraints used here.
inline std::vector<RatPoint> halfspace_vertices(const std::vector<RatPoint>& g, const std::vector<BigRational>& h,
                                                std::size_t n) {
  std::vector<RatPoint> out;
  for_each_combination(g.size(), n, [&](const std::vector<std::size_t>& idx) {
    linalg::Mat<BigRational> a;
    linalg::Vec<BigRational> b;
    for (auto i : idx) {
      a.push_back(g[i]);
      b.push_back(-h[i]);
    }
    auto x = linalg::solve(a, b);
    if (!x) return;
    for (std::size_t k = 0; k < g.size(); ++k) {
      BigRational s = h[k];
      for (std::size_t j = 0; j < n; ++j) s += g[k][j] * (*x)[j];
      if (s < 0) return;
    }
    out.push_back(std::move(*x));
  });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void add_polytope_constraints(const LatticePolytope& p, std::vector<RatPoint>& g, std::vector<BigRational>& h) {
  for (const auto& f : p.facets()) {
    g.push_back(to_rational(f.normal));
    h.emplace_back(f.offset);
  }
}

}  // namespace detail

inline PLConvexFn PLConvexFn::restricted_to(const LatticePolytope& p) const {
  if (dim() != p.dim()) throw Error(ErrorCode::SchemaViolation, "PL function and polytope dimensions differ");
  if (pieces_.size() == 1) return *this;
  std::vector<AffineFn> kept;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    std::vector<RatPoint> g;
    std::vector<BigRational> h;
    detail::add_polytope_constraints(p, g, h);
    for (std::size_t k = 0; k < pieces_.size(); ++k) {
      if (k == i) continue;
      AffineFn d = pieces_[i] - pieces_[k];
      g.push_back(d.gradient);
      h.push_back(d.constant);
    }
    auto verts = detail::halfspace_vertices(g, h, p.dim());
    if (linalg::affine_dim(verts) == static_cast<int>(p.dim())) kept.push_back(pieces_[i]);
  }
  return PLConvexFn(std::move(kept));
}

/// True iff f agrees with a single affine function on P.
inline bool is_product(const PLConvexFn& f, const LatticePolytope& p) {
  return f.restricted_to(p).pieces().size() == 1;
}

}  // namespace kstab
