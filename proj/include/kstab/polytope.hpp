#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "kstab/hull.hpp"
#include "kstab/rational.hpp"

namespace kstab {

using LatticeFacet = HullFacet<std::int64_t>;

/// Full-dimensional lattice polytope. Vertices are the extreme points in
/// lexicographic order; facets are <normal, y> >= -offset with primitive
/// inward normals.
class LatticePolytope {
 public:
  explicit LatticePolytope(Hull<std::int64_t> hull) : hull_(std::move(hull)) {}

  std::size_t dim() const { return hull_.dim; }
  const std::vector<IntPoint>& vertices() const { return hull_.vertices; }
  const std::vector<LatticeFacet>& facets() const { return hull_.facets; }
  const Hull<std::int64_t>& hull() const { return hull_; }

  bool origin_in_interior() const {
    for (const auto& f : hull_.facets)
      if (f.offset <= 0) return false;
    return true;
  }

  bool operator==(const LatticePolytope&) const = default;

 private:
  Hull<std::int64_t> hull_;
};

/// Polytope with rational vertices, e.g. the dual of a non-reflexive lattice
/// polytope. Normals are primitive integer vectors stored as rationals.
class RationalPolytope {
 public:
  explicit RationalPolytope(Hull<BigRational> hull) : hull_(std::move(hull)) {}

  std::size_t dim() const { return hull_.dim; }
  const std::vector<RatPoint>& vertices() const { return hull_.vertices; }
  const std::vector<HullFacet<BigRational>>& facets() const { return hull_.facets; }
  const Hull<BigRational>& hull() const { return hull_; }

  /// The same polytope as a LatticePolytope when every vertex is integral.
  std::optional<LatticePolytope> as_lattice() const;

  bool operator==(const RationalPolytope&) const = default;

 private:
  Hull<BigRational> hull_;
};

inline LatticePolytope make_polytope(std::vector<IntPoint> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "empty vertex list");
  const std::size_t n = points.front().size();
  if (n == 0) throw Error(ErrorCode::DegeneratePolytope, "zero-dimensional ambient space");
  return LatticePolytope(convex_hull(std::move(points), n));
}

inline RationalPolytope make_rational_polytope(std::vector<RatPoint> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "empty vertex list");
  const std::size_t n = points.front().size();
  return RationalPolytope(convex_hull(std::move(points), n));
}

inline std::optional<LatticePolytope> RationalPolytope::as_lattice() const {
  std::vector<IntPoint> pts;
  for (const auto& v : hull_.vertices) {
    IntPoint p;
    for (const auto& c : v) {
      if (!is_integer(c)) return std::nullopt;
      p.push_back(boost::multiprecision::numerator(c).convert_to<std::int64_t>());
    }
    pts.push_back(std::move(p));
  }
  return make_polytope(std::move(pts));
}

/// P* = {x : <x, y> >= -1 for all y in P}.
inline RationalPolytope dual(const LatticePolytope& p) {
  if (!p.origin_in_interior()) throw Error(ErrorCode::OriginNotInterior, "dual requires 0 in the interior");
  std::vector<RatPoint> pts;
  for (const auto& f : p.facets()) {
    RatPoint v;
    for (auto c : f.normal) v.emplace_back(BigRational(c, f.offset));
    pts.push_back(std::move(v));
  }
  return make_rational_polytope(std::move(pts));
}

/// 0 interior and every facet at lattice distance 1.
inline bool is_reflexive(const LatticePolytope& p) {
  for (const auto& f : p.facets())
    if (f.offset != 1) return false;
  return true;
}

inline BigInt factorial(std::size_t n) {
  BigInt r = 1;
  for (std::size_t i = 2; i <= n; ++i) r *= i;
  return r;
}

/// Simplicial decomposition. `face` is -1 for full-dimensional cells and the
/// facet index for boundary cells.
struct Triangulation {
  struct Cell {
    std::vector<RatPoint> vertices;
    int face = -1;
  };
  std::vector<Cell> simplices;
};

namespace detail {

template <class T>
std::vector<RatPoint> as_rat_points(const Hull<T>& h, const std::vector<std::size_t>& ids) {
  std::vector<RatPoint> out;
  for (auto i : ids) {
    if constexpr (std::is_same_v<T, std::int64_t>)
      out.push_back(to_rational(h.vertices[i]));
    else
      out.push_back(h.vertices[i]);
  }
  return out;
}

template <class T>
Triangulation triangulate_interior(const Hull<T>& h) {
  Triangulation t;
  for (auto& s : triangulate_hull(h)) t.simplices.push_back({as_rat_points(h, s), -1});
  return t;
}

template <class T>
Triangulation triangulate_facets(const Hull<T>& h) {
  Triangulation t;
  for (std::size_t fi = 0; fi < h.facets.size(); ++fi) {
    for (auto& s : triangulate_face(h, h.facets[fi].vertex_ids, static_cast<int>(h.dim) - 1))
      t.simplices.push_back({as_rat_points(h, s), static_cast<int>(fi)});
  }
  return t;
}

}  // namespace detail

inline Triangulation triangulate(const LatticePolytope& p) { return detail::triangulate_interior(p.hull()); }
inline Triangulation triangulate(const RationalPolytope& p) { return detail::triangulate_interior(p.hull()); }

/// Triangulates every facet; requires reflexive P since the lattice measure
/// on facets is only supported at lattice distance 1.
inline Triangulation triangulate_boundary(const LatticePolytope& p) {
  return detail::triangulate_facets(p.hull());
}

/// Euclidean volume of an n-simplex given by n+1 points in R^n.
inline BigRational simplex_volume(const std::vector<RatPoint>& s) {
  const std::size_t n = s.size() - 1;
  linalg::Mat<BigRational> m;
  for (std::size_t i = 1; i <= n; ++i) m.push_back(linalg::sub(s[i], s[0]));
  return abs(linalg::det(m)) / BigRational(factorial(n));
}

/// Lattice-normalized measure of an (n-1)-simplex lying in a facet at
/// lattice distance 1: n times the volume of its cone over the origin.
inline BigRational facet_simplex_measure(const std::vector<RatPoint>& s) {
  const std::size_t n = s.size();
  linalg::Mat<BigRational> m(s.begin(), s.end());
  return abs(linalg::det(m)) / BigRational(factorial(n - 1));
}

inline RatPoint centroid(const std::vector<RatPoint>& s) {
  RatPoint c(s.front().size(), BigRational(0));
  for (const auto& p : s)
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += p[i];
  for (auto& x : c) x /= static_cast<long>(s.size());
  return c;
}

namespace detail {

/// Sum of |det| and sum of |det| * (vertex sum) over the pulling
/// triangulation, in integer arithmetic.
struct VolumeMoments {
  __int128 det_sum = 0;
  std::vector<__int128> weighted;  // per coordinate
};

inline VolumeMoments volume_moments(const LatticePolytope& p) {
  const auto& h = p.hull();
  const std::size_t n = p.dim();
  VolumeMoments vm;
  vm.weighted.assign(n, 0);
  linalg::Mat<std::int64_t> m(n, IntPoint(n));
  for (const auto& s : triangulate_hull(h)) {
    for (std::size_t i = 1; i <= n; ++i) m[i - 1] = linalg::sub(h.vertices[s[i]], h.vertices[s[0]]);
    __int128 d = linalg::det_wide(m);
    if (d < 0) d = -d;
    vm.det_sum += d;
    for (std::size_t c = 0; c < n; ++c) {
      __int128 sum = 0;
      for (auto i : s) sum += h.vertices[i][c];
      vm.weighted[c] += d * sum;
    }
  }
  return vm;
}

}  // namespace detail

inline BigRational volume(const LatticePolytope& p) {
  return BigRational(to_bigint(detail::volume_moments(p).det_sum)) / BigRational(factorial(p.dim()));
}

inline BigRational volume(const RationalPolytope& p) {
  BigRational v = 0;
  for (const auto& c : triangulate(p).simplices) v += simplex_volume(c.vertices);
  return v;
}

/// (1/vol) * integral of y over P, combined from simplex centroids.
inline RatPoint barycenter(const LatticePolytope& p) {
  const auto vm = detail::volume_moments(p);
  const BigInt denom = to_bigint(vm.det_sum) * static_cast<long>(p.dim() + 1);
  RatPoint b;
  for (auto w : vm.weighted) b.emplace_back(to_bigint(w), denom);
  return b;
}

/// Total lattice measure of the boundary.
inline BigRational boundary_volume(const LatticePolytope& p) {
  if (!is_reflexive(p)) throw Error(ErrorCode::NotReflexive, "boundary measure needs facets at lattice distance 1");
  BigRational v = 0;
  for (const auto& c : triangulate_boundary(p).simplices) v += facet_simplex_measure(c.vertices);
  return v;
}

}  // namespace kstab
