#pragma once

// Brute-force convex hull and pulling triangulation for full-dimensional
// point sets in dimension <= 4. Works over int64 (lattice inputs) and
// BigRational (subdivision cells); both paths are exact.

#include <algorithm>
#include <cstddef>
#include <set>
#include <vector>

#include "kstab/errors.hpp"
#include "kstab/linalg.hpp"

namespace kstab {

/// Supporting hyperplane <normal, y> >= -offset with inward primitive normal.
template <class T>
struct HullFacet {
  std::vector<T> normal;
  T offset;
  std::vector<std::size_t> vertex_ids;  // sorted

  bool operator==(const HullFacet&) const = default;
};

template <class T>
struct Hull {
  std::size_t dim = 0;
  std::vector<std::vector<T>> vertices;  // lexicographic
  std::vector<HullFacet<T>> facets;       // sorted by normal

  bool operator==(const Hull&) const = default;
};

namespace detail {

template <class Fn>
void for_each_combination(std::size_t m, std::size_t k, Fn&& fn) {
  if (k > m) return;
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    fn(idx);
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == m - k + i - 1) --i;
    if (i == 0) return;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

template <class T>
int sign_of(const linalg::wide_t<T>& v) {
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

}  // namespace detail

/// Computes the canonical V- and H-representation of conv(points).
/// Throws EmptyInput / DegeneratePolytope.
template <class T>
Hull<T> convex_hull(std::vector<std::vector<T>> points, std::size_t dim) {
  using W = linalg::wide_t<T>;
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "no points given");
  for (const auto& p : points)
    if (p.size() != dim) throw Error(ErrorCode::SchemaViolation, "point of wrong dimension");
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  if (points.size() < dim + 1 || linalg::affine_dim(points) != static_cast<int>(dim))
    throw Error(ErrorCode::DegeneratePolytope, "points do not affinely span R^" + std::to_string(dim));

  const std::size_t m = points.size();
  std::vector<HullFacet<T>> facets;
  std::vector<std::vector<T>> seen_normals;
  linalg::Mat<T> rows(dim - 1 == 0 ? 0 : dim - 1);

  auto on_known_facet = [&](const std::vector<std::size_t>& idx) {
    for (const auto& f : facets) {
      bool all = true;
      for (auto i : idx) {
        if (!std::binary_search(f.vertex_ids.begin(), f.vertex_ids.end(), i)) {
          all = false;
          break;
        }
      }
      if (all) return true;
    }
    return false;
  };

  std::vector<int> signs(m);
  detail::for_each_combination(m, dim, [&](const std::vector<std::size_t>& idx) {
    if (on_known_facet(idx)) return;
    for (std::size_t r = 1; r < dim; ++r) rows[r - 1] = linalg::sub(points[idx[r]], points[idx[0]]);
    std::vector<T> normal = linalg::cofactor_normal(rows, dim);
    bool zero = std::all_of(normal.begin(), normal.end(), [](const T& c) { return c == 0; });
    if (zero) return;
    const W base = linalg::dot_wide(normal, points[idx[0]]);
    int pos = 0, neg = 0;
    for (std::size_t j = 0; j < m; ++j) {
      signs[j] = detail::sign_of<T>(linalg::dot_wide(normal, points[j]) - base);
      if (signs[j] > 0) ++pos;
      if (signs[j] < 0) ++neg;
      if (pos && neg) return;
    }
    if (neg) {
      for (auto& c : normal) c = -c;
    }
    linalg::make_primitive(normal);
    HullFacet<T> f;
    f.offset = -linalg::dot(normal, points[idx[0]]);
    for (std::size_t j = 0; j < m; ++j)
      if (signs[j] == 0) f.vertex_ids.push_back(j);
    f.normal = std::move(normal);
    facets.push_back(std::move(f));
  });

  // Extreme points: incident facet normals span R^dim.
  std::vector<std::size_t> remap(m, static_cast<std::size_t>(-1));
  Hull<T> hull;
  hull.dim = dim;
  for (std::size_t j = 0; j < m; ++j) {
    linalg::Mat<T> normals;
    for (const auto& f : facets)
      if (std::binary_search(f.vertex_ids.begin(), f.vertex_ids.end(), j)) normals.push_back(f.normal);
    if (normals.size() >= dim && linalg::rank(normals) == dim) {
      remap[j] = hull.vertices.size();
      hull.vertices.push_back(points[j]);
    }
  }
  for (auto& f : facets) {
    std::vector<std::size_t> ids;
    for (auto j : f.vertex_ids)
      if (remap[j] != static_cast<std::size_t>(-1)) ids.push_back(remap[j]);
    f.vertex_ids = std::move(ids);
  }
  std::sort(facets.begin(), facets.end(), [](const auto& a, const auto& b) { return a.normal < b.normal; });
  hull.facets = std::move(facets);
  return hull;
}

/// Pulling triangulation of a face (given by sorted vertex ids of `hull`,
/// of affine dimension `face_dim`): cone from the lowest-index vertex over
/// the triangulated sub-facets not containing it.
template <class T>
std::vector<std::vector<std::size_t>> triangulate_face(const Hull<T>& hull, const std::vector<std::size_t>& face,
                                                       int face_dim) {
  if (face_dim == 0) return {{face.front()}};
  const std::size_t apex = face.front();
  std::set<std::vector<std::size_t>> subfaces;
  for (const auto& f : hull.facets) {
    std::vector<std::size_t> s;
    std::set_intersection(face.begin(), face.end(), f.vertex_ids.begin(), f.vertex_ids.end(), std::back_inserter(s));
    if (s.size() < static_cast<std::size_t>(face_dim) || s.size() == face.size()) continue;
    if (std::binary_search(s.begin(), s.end(), apex)) continue;
    if (subfaces.count(s)) continue;
    std::vector<std::vector<T>> pts;
    for (auto i : s) pts.push_back(hull.vertices[i]);
    if (linalg::affine_dim(pts) != face_dim - 1) continue;
    subfaces.insert(std::move(s));
  }
  std::vector<std::vector<std::size_t>> out;
  for (const auto& s : subfaces) {
    for (auto simplex : triangulate_face(hull, s, face_dim - 1)) {
      simplex.insert(simplex.begin(), apex);
      out.push_back(std::move(simplex));
    }
  }
  return out;
}

template <class T>
std::vector<std::vector<std::size_t>> triangulate_hull(const Hull<T>& hull) {
  std::vector<std::size_t> all(hull.vertices.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return triangulate_face(hull, all, static_cast<int>(hull.dim));
}

}  // namespace kstab
