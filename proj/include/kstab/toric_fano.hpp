#pragma once

#include <optional>
#include <vector>

#include "kstab/pl_function.hpp"

namespace kstab {

/// Toric Fano variety given by its anticanonical moment polytope.
class ToricFano {
 public:
  const LatticePolytope& polytope() const { return polytope_; }
  std::size_t dim() const { return polytope_.dim(); }
  /// (-K_X)^n = n! vol(P).
  const BigRational& degree() const { return degree_; }
  const RatPoint& barycenter() const { return barycenter_; }
  /// Fan rays: the primitive facet normals of P.
  std::vector<IntPoint> rays() const {
    std::vector<IntPoint> r;
    for (const auto& f : polytope_.facets()) r.push_back(f.normal);
    return r;
  }

  friend ToricFano from_polytope(LatticePolytope p);

 private:
  ToricFano(LatticePolytope p, BigRational degree, RatPoint barycenter)
      : polytope_(std::move(p)), degree_(std::move(degree)), barycenter_(std::move(barycenter)) {}

  LatticePolytope polytope_;
  BigRational degree_;
  RatPoint barycenter_;
};

inline ToricFano from_polytope(LatticePolytope p) {
  if (!is_reflexive(p)) throw Error(ErrorCode::NotReflexive, "polytope has a facet not at lattice distance 1");
  const auto vm = detail::volume_moments(p);
  // n! vol(P) is the plain sum of |det| over the triangulation.
  BigRational degree(to_bigint(vm.det_sum));
  const BigInt denom = to_bigint(vm.det_sum) * static_cast<long>(p.dim() + 1);
  RatPoint b;
  for (auto w : vm.weighted) b.emplace_back(to_bigint(w), denom);
  return ToricFano(std::move(p), std::move(degree), std::move(b));
}

/// Builds P = {y : <y, v> >= -1 for every ray v}; the rays must be exactly
/// the facet normals of a reflexive P.
inline ToricFano from_fan(const std::vector<IntPoint>& rays) {
  if (rays.empty()) throw Error(ErrorCode::EmptyInput, "no rays");
  const std::size_t n = rays.front().size();
  try {
    if (!make_polytope(rays).origin_in_interior()) throw Error(ErrorCode::DegeneratePolytope, "");
  } catch (const Error&) {
    throw Error(ErrorCode::DegeneratePolytope, "rays do not positively span R^" + std::to_string(n));
  }
  std::vector<RatPoint> g;
  std::vector<BigRational> h;
  for (const auto& r : rays) {
    if (r.size() != n) throw Error(ErrorCode::SchemaViolation, "rays of mixed dimension");
    g.push_back(to_rational(r));
    h.emplace_back(1);
  }
  std::vector<IntPoint> verts;
  for (const auto& v : detail::halfspace_vertices(g, h, n)) {
    IntPoint p;
    for (const auto& c : v) {
      if (!is_integer(c)) throw Error(ErrorCode::NotReflexive, "dual of the fan has a non-lattice vertex");
      p.push_back(boost::multiprecision::numerator(c).convert_to<std::int64_t>());
    }
    verts.push_back(std::move(p));
  }
  LatticePolytope p = make_polytope(std::move(verts));
  for (const auto& r : rays) {
    bool found = false;
    for (const auto& f : p.facets()) found = found || f.normal == r;
    if (!found) throw Error(ErrorCode::RedundantRay, "ray cuts out no facet");
  }
  return from_polytope(std::move(p));
}

enum class Stability { KPolystable, KUnstable };

inline const char* to_string(Stability s) { return s == Stability::KPolystable ? "KPolystable" : "KUnstable"; }

struct StabilityVerdict {
  Stability status;
  RatPoint barycenter;
  BigRational degree;
  std::optional<AffineFn> witness;  // linear function with gradient -b_P when unstable
};

/// K-polystable iff the barycenter of P is the origin.
inline StabilityVerdict decide_kps(const ToricFano& x) {
  StabilityVerdict v{Stability::KPolystable, x.barycenter(), x.degree(), std::nullopt};
  bool zero = std::all_of(v.barycenter.begin(), v.barycenter.end(), [](const BigRational& c) { return c == 0; });
  if (!zero) {
    v.status = Stability::KUnstable;
    RatPoint a;
    for (const auto& c : v.barycenter) a.push_back(-c);
    v.witness = linear_fn(std::move(a));
  }
  return v;
}

}  // namespace kstab
