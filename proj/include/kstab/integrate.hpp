#pragma once

// Exact integration of piecewise-linear functions over a polytope (Euclidean
// measure) and over its boundary (lattice measure). Each simplex of the
// triangulation is split into the cells where one piece is maximal; the cells
// are found in barycentric coordinates, so interior and facet simplices use
// the same code.

#include <vector>

#include "kstab/pl_function.hpp"

namespace kstab {

enum class Region { Interior, Boundary };

namespace detail {

/// Integral over a k-simplex of total measure `mass` of max_i piece_i, where
/// values[i][j] is piece i at simplex vertex j.
inline BigRational integrate_simplex(const std::vector<std::vector<BigRational>>& values, const BigRational& mass) {
  const std::size_t pieces = values.size();
  const std::size_t k = values.front().size() - 1;
  if (k == 0) {
    BigRational best = values[0][0];
    for (const auto& v : values) best = std::max(best, v[0]);
    return mass * best;
  }
  const BigRational kfact(factorial(k));
  BigRational total = 0;
  for (std::size_t i = 0; i < pieces; ++i) {
    // Constraints in mu = (lambda_1..lambda_k): <g, mu> + h >= 0.
    std::vector<RatPoint> g;
    std::vector<BigRational> h;
    bool empty = false;
    for (std::size_t m = 0; m < pieces && !empty; ++m) {
      if (m == i) continue;
      std::vector<BigRational> d(k + 1);
      bool all_ge = true, all_le = true, all_zero = true;
      for (std::size_t j = 0; j <= k; ++j) {
        d[j] = values[i][j] - values[m][j];
        all_ge = all_ge && d[j] >= 0;
        all_le = all_le && d[j] <= 0;
        all_zero = all_zero && d[j] == 0;
      }
      if (all_zero) {
        // Pieces coincide on this simplex: the lower index owns it.
        if (m < i) empty = true;
        continue;
      }
      if (all_ge) continue;
      if (all_le) {
        empty = true;
        continue;
      }
      RatPoint gm(k);
      for (std::size_t j = 1; j <= k; ++j) gm[j - 1] = d[j] - d[0];
      g.push_back(std::move(gm));
      h.push_back(d[0]);
    }
    if (empty) continue;
    if (g.empty()) {
      BigRational mean = 0;
      for (const auto& v : values[i]) mean += v;
      total += mass * mean / static_cast<long>(k + 1);
      continue;
    }
    for (std::size_t j = 0; j < k; ++j) {
      RatPoint e(k, BigRational(0));
      e[j] = 1;
      g.push_back(std::move(e));
      h.emplace_back(0);
    }
    g.emplace_back(k, BigRational(-1));
    h.emplace_back(1);
    auto verts = halfspace_vertices(g, h, k);
    if (linalg::affine_dim(verts) != static_cast<int>(k)) continue;
    auto cell = convex_hull(std::move(verts), k);
    for (const auto& s : triangulate_hull(cell)) {
      std::vector<RatPoint> pts;
      for (auto id : s) pts.push_back(cell.vertices[id]);
      // Piece i at the cell-simplex centroid, via barycentric interpolation.
      RatPoint c = centroid(pts);
      BigRational lambda0 = 1;
      BigRational val = 0;
      for (std::size_t j = 0; j < k; ++j) {
        lambda0 -= c[j];
        val += c[j] * values[i][j + 1];
      }
      val += lambda0 * values[i][0];
      total += mass * kfact * simplex_volume(pts) * val;
    }
  }
  return total;
}

inline std::vector<std::vector<BigRational>> piece_values(const PLConvexFn& f, const std::vector<RatPoint>& simplex) {
  std::vector<std::vector<BigRational>> values;
  for (const auto& p : f.pieces()) {
    std::vector<BigRational> row;
    for (const auto& v : simplex) row.push_back(p(v));
    values.push_back(std::move(row));
  }
  return values;
}

}  // namespace detail

/// Exact integral of f over P (Interior, Euclidean measure) or over the
/// boundary of P (Boundary, lattice measure; P must be reflexive).
inline BigRational integrate_pl(const LatticePolytope& p, const PLConvexFn& f, Region region = Region::Interior) {
  if (f.dim() != p.dim()) throw Error(ErrorCode::SchemaViolation, "function and polytope dimensions differ");
  const PLConvexFn g = f.restricted_to(p);
  BigRational total = 0;
  if (region == Region::Interior) {
    for (const auto& c : triangulate(p).simplices)
      total += detail::integrate_simplex(detail::piece_values(g, c.vertices), simplex_volume(c.vertices));
  } else {
    if (!is_reflexive(p)) throw Error(ErrorCode::NotReflexive, "boundary measure needs facets at lattice distance 1");
    for (const auto& c : triangulate_boundary(p).simplices)
      total += detail::integrate_simplex(detail::piece_values(g, c.vertices), facet_simplex_measure(c.vertices));
  }
  return total;
}

inline BigRational integrate_pl(const LatticePolytope& p, const AffineFn& f, Region region = Region::Interior) {
  return integrate_pl(p, PLConvexFn(f), region);
}

/// Points where the minimum of a PL convex function over P can occur:
/// intersections of n independent hyperplanes drawn from the facets of P and
/// the creases {piece_i = piece_k}, kept when inside P.
inline std::vector<RatPoint> subdivision_vertices(const LatticePolytope& p, const PLConvexFn& f) {
  std::vector<RatPoint> g;
  std::vector<BigRational> h;
  detail::add_polytope_constraints(p, g, h);
  const std::size_t facet_count = g.size();
  const auto& ps = f.pieces();
  for (std::size_t i = 0; i < ps.size(); ++i)
    for (std::size_t k = i + 1; k < ps.size(); ++k) {
      AffineFn d = ps[i] - ps[k];
      g.push_back(d.gradient);
      h.push_back(d.constant);
    }
  std::vector<RatPoint> out;
  detail::for_each_combination(g.size(), p.dim(), [&](const std::vector<std::size_t>& idx) {
    linalg::Mat<BigRational> a;
    linalg::Vec<BigRational> b;
    for (auto i : idx) {
      a.push_back(g[i]);
      b.push_back(-h[i]);
    }
    auto x = linalg::solve(a, b);
    if (!x) return;
    for (std::size_t k = 0; k < facet_count; ++k) {
      BigRational s = h[k];
      for (std::size_t j = 0; j < p.dim(); ++j) s += g[k][j] * (*x)[j];
      if (s < 0) return;
    }
    out.push_back(std::move(*x));
  });
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace kstab
