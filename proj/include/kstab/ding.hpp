#pragma once

// Toric Ding functional along the ray u_t = u0 + t f in symplectic
// coordinates. u0 is the Guillemin potential of P; phi_t = (u_t)^* is
// evaluated by concave maximization over P, and Z(t) = int e^{-phi_t} by
// truncated adaptive quadrature on R^n (n <= 2).

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numbers>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "kstab/quadrature.hpp"
#include "kstab/test_configuration.hpp"

namespace kstab {

struct DingParams {
  double eps_opt = 1e-10;
  double eps_quad = 1e-6;
  double slope_tol = 5e-3;
  double eps_conv = 1e-4;
  double fd_step = 0.05;
  double cross_check_tol = 1e-4;
  double radius_cap = 5000;
  std::vector<double> schedule{5, 10, 20, 40};
  unsigned jobs = 1;
};

using Point2 = std::array<double, 2>;

/// u_t(y) = sum_i l_i log l_i + t f(y), l_i = <v_i, y> + o_i.
class SymplecticPotential {
 public:
  static constexpr std::size_t kMaxFacets = 8;
  using Slacks = std::array<double, kMaxFacets>;

  SymplecticPotential(const ToricFano& x, const PLConvexFn& f, double t);

  std::size_t dim() const { return n_; }
  double time() const { return t_; }
  const PLConvexFn& direction() const { return f_; }
  const LatticePolytope& polytope() const { return p_; }

  Slacks slacks(const Point2& y) const {
    Slacks l{};
    for (std::size_t i = 0; i < m_; ++i) l[i] = normal_[i][0] * y[0] + normal_[i][1] * y[1] + offset_[i];
    return l;
  }
  double u0(const Slacks& l) const {
    double s = 0;
    for (std::size_t i = 0; i < m_; ++i)
      if (l[i] > 0) s += l[i] * std::log(l[i]);
    return s;
  }
  double f(const Point2& y) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& pc : pieces_) best = std::max(best, pc.a[0] * y[0] + pc.a[1] * y[1] + pc.c);
    return best;
  }
  /// u_t(y); +inf outside P.
  double operator()(const Point2& y) const {
    auto l = slacks(y);
    for (std::size_t i = 0; i < m_; ++i)
      if (l[i] < -1e-14) return std::numeric_limits<double>::infinity();
    return u0(l) + t_ * f(y);
  }

  /// Max of u_t over P (attained at a vertex).
  double max_value() const { return max_u_; }
  /// Distance from 0 to the nearest facet hyperplane.
  double inradius() const { return inradius_; }
  /// max_P |y|, a Lipschitz constant for phi_t.
  double diameter() const { return diameter_; }
  /// Bound for max_P |f|.
  double f_bound() const { return f_bound_; }
  /// max <x, y> - u_t(y) over the vertices of P and of the subdivision of f;
  /// a lower bound for phi_t(x).
  double phi_lower(const Point2& x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& [y, uy] : anchors_) best = std::max(best, x[0] * y[0] + x[1] * y[1] - uy);
    return best;
  }
  /// Support function h_P(x) = max_P <x, y>.
  double support(const Point2& x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : vertex_) best = std::max(best, v[0] * x[0] + v[1] * x[1]);
    return best;
  }

  struct Piece {
    Point2 a;
    double c;
  };
  struct Segment {
    std::size_t piece;
    Point2 p, q;
    Slacks lp, lq, dl;  // slacks at both ends and their change along q - p
  };
  struct Fixed {
    Point2 y;
    Slacks l;
  };
  /// Tangent cone at a vertex: y = v + sum_a l_a w_a over the facets a
  /// through v, and l_k = base_k + sum_a c[k][a] l_a for the others.
  struct Cone {
    Point2 v;
    std::array<std::size_t, 2> active;
    std::array<Point2, 2> w;
    Slacks base;
    std::array<std::array<double, 2>, kMaxFacets> c;
  };

 private:
  friend struct LegendreSolver;

  LatticePolytope p_;
  PLConvexFn f_;
  double t_;
  std::size_t n_, m_;
  std::vector<Point2> normal_, vertex_;
  std::vector<double> offset_;
  std::vector<Piece> pieces_;
  std::vector<Segment> creases_;    // n = 2: chords of P where two pieces agree
  std::vector<Fixed> corners_;      // crease points (n = 1) and triple points (n = 2)
  std::vector<Cone> cones_;
  std::vector<std::pair<Point2, double>> anchors_;
  double max_u_ = 0, inradius_ = 0, diameter_ = 0, f_bound_ = 0;
};

namespace detail {

inline Point2 to_point2(const RatPoint& y) {
  Point2 p{0, 0};
  for (std::size_t i = 0; i < y.size(); ++i) p[i] = to_double(y[i]);
  return p;
}

}  // namespace detail

inline SymplecticPotential::SymplecticPotential(const ToricFano& x, const PLConvexFn& f, double t)
    : p_(x.polytope()), f_(f.restricted_to(x.polytope())), t_(t), n_(x.dim()), m_(x.polytope().facets().size()) {
  if (n_ > 2) throw Error(ErrorCode::DimensionUnsupported, "numerical Ding module supports n <= 2, got n = " + std::to_string(n_));
  if (f.dim() != n_) throw Error(ErrorCode::SchemaViolation, "PL function and polytope dimensions differ");
  if (!(t >= 0)) throw Error(ErrorCode::SchemaViolation, "ray parameter must be >= 0");
  if (m_ > kMaxFacets) throw Error(ErrorCode::DimensionUnsupported, "too many facets");

  inradius_ = std::numeric_limits<double>::infinity();
  for (const auto& fc : p_.facets()) {
    Point2 v{0, 0};
    for (std::size_t j = 0; j < n_; ++j) v[j] = static_cast<double>(fc.normal[j]);
    normal_.push_back(v);
    offset_.push_back(static_cast<double>(fc.offset));
    inradius_ = std::min(inradius_, offset_.back() / std::hypot(v[0], v[1]));
  }
  for (const auto& pc : f_.pieces()) {
    Piece q{{0, 0}, to_double(pc.constant)};
    for (std::size_t j = 0; j < n_; ++j) q.a[j] = to_double(pc.gradient[j]);
    pieces_.push_back(q);
  }

  auto exact_slacks = [&](const RatPoint& y) {
    Slacks l{};
    for (std::size_t i = 0; i < m_; ++i) {
      BigRational s = p_.facets()[i].offset;
      for (std::size_t j = 0; j < n_; ++j) s += p_.facets()[i].normal[j] * y[j];
      l[i] = to_double(s);
    }
    return l;
  };
  auto strictly_inside = [&](const Slacks& l) {
    for (std::size_t i = 0; i < m_; ++i)
      if (l[i] <= 0) return false;
    return true;
  };

  max_u_ = -std::numeric_limits<double>::infinity();
  for (const auto& v : p_.vertices()) {
    const RatPoint y = to_rational(v);
    vertex_.push_back(detail::to_point2(y));
    const double u = u0(exact_slacks(y)) + t_ * to_double(f_(y));
    max_u_ = std::max(max_u_, u);
    diameter_ = std::max(diameter_, std::hypot(to_double(y[0]), n_ > 1 ? to_double(y[1]) : 0.0));
    f_bound_ = std::max(f_bound_, std::abs(to_double(f_(y))));
  }
  for (const auto& y : subdivision_vertices(p_, f_)) {
    f_bound_ = std::max(f_bound_, std::abs(to_double(f_(y))));
    anchors_.emplace_back(detail::to_point2(y), u0(exact_slacks(y)) + t_ * to_double(f_(y)));
  }

  for (const auto& vert : p_.vertices()) {
    const RatPoint y = to_rational(vert);
    Cone cone{detail::to_point2(y), {0, 0}, {}, exact_slacks(y), {}};
    linalg::Mat<BigRational> nm;
    std::vector<std::size_t> act;
    for (std::size_t i = 0; i < m_; ++i) {
      BigRational sl = p_.facets()[i].offset;
      for (std::size_t j = 0; j < n_; ++j) sl += p_.facets()[i].normal[j] * y[j];
      if (sl == 0) act.push_back(i);
    }
    if (act.size() != n_) continue;  // lattice polygons and intervals are simple
    for (std::size_t a = 0; a < n_; ++a) {
      cone.active[a] = act[a];
      nm.push_back(to_rational(p_.facets()[act[a]].normal));
    }
    for (std::size_t a = 0; a < n_; ++a) {
      linalg::Vec<BigRational> e(n_, BigRational(0));
      e[a] = 1;
      const auto col = linalg::solve(nm, e);  // <v_b, w_a> = delta_ab
      if (!col) continue;
      cone.w[a] = detail::to_point2(*col);
      for (std::size_t k = 0; k < m_; ++k) {
        BigRational ck = 0;
        for (std::size_t j = 0; j < n_; ++j) ck += p_.facets()[k].normal[j] * (*col)[j];
        cone.c[k][a] = to_double(ck);
      }
    }
    cones_.push_back(cone);
  }

  const auto& ps = f_.pieces();
  if (n_ == 1) {
    for (std::size_t j = 0; j < ps.size(); ++j)
      for (std::size_t k = j + 1; k < ps.size(); ++k) {
        const BigRational da = ps[j].gradient[0] - ps[k].gradient[0];
        if (da == 0) continue;
        const RatPoint y{-(ps[j].constant - ps[k].constant) / da};
        const auto l = exact_slacks(y);
        if (strictly_inside(l)) corners_.push_back({detail::to_point2(y), l});
      }
    return;
  }
  for (std::size_t j = 0; j < ps.size(); ++j)
    for (std::size_t k = j + 1; k < ps.size(); ++k) {
      const AffineFn d = ps[j] - ps[k];
      std::vector<RatPoint> g;
      std::vector<BigRational> h;
      detail::add_polytope_constraints(p_, g, h);
      g.push_back(d.gradient);
      h.push_back(d.constant);
      g.push_back({-d.gradient[0], -d.gradient[1]});
      h.push_back(-d.constant);
      const auto ends = detail::halfspace_vertices(g, h, 2);
      if (ends.size() != 2) continue;
      Segment s{j, detail::to_point2(ends[0]), detail::to_point2(ends[1]), exact_slacks(ends[0]), exact_slacks(ends[1]), {}};
      bool on_boundary = false;
      for (std::size_t i = 0; i < m_; ++i) {
        on_boundary = on_boundary || (s.lp[i] == 0 && s.lq[i] == 0);
        BigRational dl = 0;
        for (std::size_t c = 0; c < 2; ++c) dl += p_.facets()[i].normal[c] * (ends[1][c] - ends[0][c]);
        s.dl[i] = to_double(dl);
      }
      if (!on_boundary) creases_.push_back(s);
    }
  for (std::size_t j = 0; j < ps.size(); ++j)
    for (std::size_t k = j + 1; k < ps.size(); ++k)
      for (std::size_t l = k + 1; l < ps.size(); ++l) {
        const AffineFn d1 = ps[j] - ps[k], d2 = ps[j] - ps[l];
        auto y = linalg::solve(linalg::Mat<BigRational>{d1.gradient, d2.gradient},
                               linalg::Vec<BigRational>{-d1.constant, -d2.constant});
        if (!y) continue;
        const auto sl = exact_slacks(*y);
        if (strictly_inside(sl)) corners_.push_back({detail::to_point2(*y), sl});
      }
}

struct LegendreResult {
  double value;
  Point2 argmax;
};

/// Warm-start state for repeated evaluations at nearby points. Results do not
/// depend on it beyond the optimization tolerance.
struct LegendreCache {
  struct Start {
    Point2 y;
    SymplecticPotential::Slacks l;
    bool valid = false;
  };
  std::vector<Start> pieces;
  std::vector<std::array<double, 2>> creases;  // (s, 1 - s)
};

struct LegendreSolver {
  using Slacks = SymplecticPotential::Slacks;
  const SymplecticPotential& u;
  double eps;
  static constexpr int kMaxIter = 400;

  bool is_active(const SymplecticPotential::Cone& c, std::size_t i) const {
    for (std::size_t a = 0; a < u.n_; ++a)
      if (c.active[a] == i) return true;
    return false;
  }

  // Same problem in the tangent cone of a vertex with s_a = log l_a for the
  // facets through it. Solves the stationarity equations
  //   G_a = <z, w_a> - 1 - s_a - sum_{k not active} c_ka (log l_k + 1) = 0,
  // which stay well scaled when l_a underflows.
  bool centre_in_cone(const Point2& z, const SymplecticPotential::Cone& cone, Point2& y, Slacks& l) const {
    const std::size_t n = u.n_, m = u.m_;
    std::array<double, 2> zw{0, 0}, s{0, 0};
    for (std::size_t a = 0; a < n; ++a) zw[a] = z[0] * cone.w[a][0] + z[1] * cone.w[a][1];
    auto fill = [&](const std::array<double, 2>& ss, Slacks& out) {
      out = cone.base;
      for (std::size_t a = 0; a < n; ++a) out[cone.active[a]] = std::exp(ss[a]);
      for (std::size_t k = 0; k < m; ++k) {
        if (is_active(cone, k)) continue;
        for (std::size_t a = 0; a < n; ++a) out[k] += cone.c[k][a] * std::exp(ss[a]);
        if (!(out[k] > 0)) return false;
      }
      return true;
    };
    double noise = 0;
    auto residual = [&](const std::array<double, 2>& ss, const Slacks& ll) {
      std::array<double, 2> g{0, 0};
      noise = 0;
      for (std::size_t a = 0; a < n; ++a) {
        g[a] = zw[a] - 1 - ss[a];
        noise += std::abs(zw[a]) + std::abs(ss[a]) + 1;
        for (std::size_t k = 0; k < m; ++k) {
          if (is_active(cone, k)) continue;
          const double lg = std::log(ll[k]) + 1;
          g[a] -= cone.c[k][a] * lg;
          noise += std::abs(cone.c[k][a] * lg);
        }
      }
      return g;
    };
    auto size = [&](const std::array<double, 2>& g) { return std::max(std::abs(g[0]), std::abs(g[1])); };

    // Start as if the cone slacks were negligible, then pull inside P.
    for (std::size_t a = 0; a < n; ++a) {
      s[a] = zw[a] - 1;
      for (std::size_t k = 0; k < m; ++k)
        if (!is_active(cone, k)) s[a] -= cone.c[k][a] * (std::log(cone.base[k]) + 1);
      s[a] = std::min(s[a], 0.0);
    }
    Slacks ll;
    for (int k = 0; !fill(s, ll); ++k) {
      if (k == 200) return false;
      for (std::size_t a = 0; a < n; ++a) s[a] -= 1;
    }
    auto g = residual(s, ll);
    for (int it = 0; it < kMaxIter; ++it) {
      // |grad_y| <= sum_a |G_a| |v_a|
      double gy = 0;
      for (std::size_t a = 0; a < n; ++a) gy += std::abs(g[a]) * std::hypot(u.normal_[cone.active[a]][0], u.normal_[cone.active[a]][1]);
      if (gy * 2 * u.diameter_ <= 0.1 * eps || size(g) <= 64 * std::numeric_limits<double>::epsilon() * noise) {
        l = ll;
        y = cone.v;
        for (std::size_t a = 0; a < n; ++a) {
          y[0] += ll[cone.active[a]] * cone.w[a][0];
          y[1] += ll[cone.active[a]] * cone.w[a][1];
        }
        return true;
      }
      // dG/ds = -(I + M L), M_ab = sum_k c_ka c_kb / l_k
      double j00 = 1, j01 = 0, j10 = 0, j11 = 1;
      for (std::size_t k = 0; k < m; ++k) {
        if (is_active(cone, k)) continue;
        const double inv = 1 / ll[k];
        const double l0 = ll[cone.active[0]], l1 = n == 2 ? ll[cone.active[1]] : 0.0;
        j00 += cone.c[k][0] * cone.c[k][0] * inv * l0;
        if (n == 2) {
          j01 += cone.c[k][0] * cone.c[k][1] * inv * l1;
          j10 += cone.c[k][1] * cone.c[k][0] * inv * l0;
          j11 += cone.c[k][1] * cone.c[k][1] * inv * l1;
        }
      }
      std::array<double, 2> ds{0, 0};
      if (n == 1) {
        ds[0] = g[0] / j00;
      } else {
        const double det = j00 * j11 - j01 * j10;
        ds = {(g[0] * j11 - j01 * g[1]) / det, (j00 * g[1] - j10 * g[0]) / det};
      }
      double step = 1;
      bool moved = false;
      for (int bt = 0; bt < 60 && !moved; ++bt, step *= 0.5) {
        const std::array<double, 2> s1{s[0] + step * ds[0], s[1] + step * ds[1]};
        Slacks l1;
        if (!fill(s1, l1)) continue;
        const auto g1 = residual(s1, l1);
        if (size(g1) < size(g) || bt == 59) {
          s = s1;
          ll = l1;
          g = g1;
          moved = true;
        }
      }
      if (!moved) return false;
    }
    return false;
  }

  // Tries first the cone on the tightest facet whose other facet is
  // tightest, then the remaining cones by decreasing <z, v> - u0(v). A cone
  // far from the maximizer fails by cancellation rather than converging to a
  // wrong point, since the stationary point is unique.
  bool centre_near_boundary(const Point2& z, Point2& y, Slacks& l) const {
    std::size_t tight = 0;
    for (std::size_t i = 1; i < u.m_; ++i)
      if (l[i] < l[tight]) tight = i;
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t c = 0; c < u.cones_.size(); ++c) {
      const auto& cone = u.cones_[c];
      double key = z[0] * cone.v[0] + z[1] * cone.v[1] - u.u0(cone.base);
      if (is_active(cone, tight)) {
        double other = 0;
        for (std::size_t a = 0; a < u.n_; ++a)
          if (cone.active[a] != tight) other = l[cone.active[a]];
        key = std::numeric_limits<double>::max() / (2 + other);
      }
      order.emplace_back(-key, c);
    }
    std::sort(order.begin(), order.end());
    for (const auto& [key, c] : order)
      if (centre_in_cone(z, u.cones_[c], y, l)) return true;
    return false;
  }

  // Maximizes <z, y> - u0(y) over int P by damped Newton, tracking slacks
  // incrementally so that tiny slacks keep their relative precision. Once a
  // slack falls below 1e-200 the cone solver takes over.
  void centre(const Point2& z, Point2& y, Slacks& l) const {
    const std::size_t n = u.n_, m = u.m_;
    auto objective = [&](const Point2& yy, const Slacks& ll) { return z[0] * yy[0] + z[1] * yy[1] - u.u0(ll); };
    auto fallback = [&](const char* what) {
      if (!centre_near_boundary(z, y, l)) throw Error(ErrorCode::OptimizationFailed, what);
    };
    for (int it = 0; it < kMaxIter; ++it) {
      if (*std::min_element(l.begin(), l.begin() + m) < 1e-200) return fallback("cone solve for the Legendre transform failed");
      // Work in the orthonormal frame (e, e_perp) with e along the normal of
      // the facet with the smallest slack: the huge Hessian term then sits in
      // one diagonal entry and the 2x2 solve does not cancel.
      std::size_t tight = 0;
      for (std::size_t i = 1; i < m; ++i)
        if (l[i] < l[tight]) tight = i;
      Point2 e{1, 0};
      if (n == 2) {
        const auto& vt = u.normal_[tight];
        const double len = std::hypot(vt[0], vt[1]);
        e = {vt[0] / len, vt[1] / len};
      }
      const Point2 ep{-e[1], e[0]};
      double ge = z[0] * e[0] + z[1] * e[1], gp = z[0] * ep[0] + z[1] * ep[1];
      double h00 = 0, h01 = 0, h11 = 0;
      Slacks ca{}, cb{};
      for (std::size_t i = 0; i < m; ++i) {
        const auto& v = u.normal_[i];
        ca[i] = v[0] * e[0] + v[1] * e[1];
        cb[i] = (n == 2 && i != tight) ? v[0] * ep[0] + v[1] * ep[1] : 0.0;
        const double lg = std::log(l[i]) + 1, inv = 1 / l[i];
        ge -= ca[i] * lg;
        gp -= cb[i] * lg;
        h00 += ca[i] * ca[i] * inv;
        h01 += ca[i] * cb[i] * inv;
        h11 += cb[i] * cb[i] * inv;
      }
      double alpha, beta = 0;
      if (n == 1) {
        alpha = ge / h00;
      } else {
        // Cramer's rule normalized by the diagonal; the raw determinant
        // overflows once two slacks are below ~1e-155.
        const double q0 = h01 / h00, q1 = h01 / h11;
        const double det = 1 - q0 * q1;
        alpha = (ge / h00 - q0 * (gp / h11)) / det;
        beta = (gp / h11 - q1 * (ge / h00)) / det;
      }
      const Point2 d{alpha * e[0] + beta * ep[0], alpha * e[1] + beta * ep[1]};
      const double dec = ge * alpha + gp * beta;
      if (!(dec >= 0)) break;
      // Concavity: F* - F <= |grad F| * diam(P). The second bound is the
      // rounding floor of the gradient itself.
      double noise = std::abs(z[0]) + std::abs(z[1]);
      for (std::size_t i = 0; i < m; ++i) noise += (std::abs(ca[i]) + std::abs(cb[i])) * (std::abs(std::log(l[i])) + 1);
      const double gnorm = std::hypot(ge, gp);
      if (gnorm * 2 * u.diameter_ <= 0.1 * eps || gnorm <= 64 * std::numeric_limits<double>::epsilon() * noise) return;
      Slacks dl{};
      double amax = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m; ++i) {
        dl[i] = ca[i] * alpha + cb[i] * beta;
        if (dl[i] < 0) amax = std::min(amax, -l[i] / dl[i]);
      }
      double a = std::min(1.0, 0.95 * amax);
      const double f0 = objective(y, l);
      for (int bt = 0; bt < 60; ++bt) {
        Point2 y1{y[0] + a * d[0], y[1] + a * d[1]};
        Slacks l1 = l;
        bool ok = true;
        for (std::size_t i = 0; i < m; ++i) {
          l1[i] += a * dl[i];
          ok = ok && l1[i] > 0;
        }
        if (ok && objective(y1, l1) >= f0 + 1e-4 * a * dec - 1e-15 * (1 + std::abs(f0))) {
          y = y1;
          l = l1;
          break;
        }
        a *= 0.5;
        if (bt == 59) return fallback("line search stalled in Legendre transform");
      }
    }
    fallback("Newton iteration for the Legendre transform did not converge");
  }

  // Maximizes <w, y> - u0(y) along a crease chord y = p + s (q - p).
  // The parameter is carried as the pair (s, 1 - s) so slacks vanishing at
  // either end are computed without cancellation.
  void chord(const SymplecticPotential::Segment& seg, const Point2& w, std::array<double, 2>& sr, Point2& y,
             Slacks& l) const {
    const std::size_t m = u.m_;
    const Point2 d{seg.q[0] - seg.p[0], seg.q[1] - seg.p[1]};
    const double wd = w[0] * d[0] + w[1] * d[1];
    auto slacks_at = [&](const std::array<double, 2>& x) {
      Slacks out{};
      for (std::size_t i = 0; i < m; ++i) out[i] = x[0] <= x[1] ? seg.lp[i] + x[0] * seg.dl[i] : seg.lq[i] - x[1] * seg.dl[i];
      return out;
    };
    double noise = 0;
    auto derivs = [&](const Slacks& ll, double& d1, double& d2) {
      d1 = wd;
      d2 = 0;
      noise = std::abs(wd);
      for (std::size_t i = 0; i < m; ++i) {
        if (seg.dl[i] == 0) continue;
        const double lg = std::log(ll[i]) + 1;
        d1 -= seg.dl[i] * lg;
        d2 -= seg.dl[i] * seg.dl[i] / ll[i];
        noise += std::abs(seg.dl[i] * lg);
      }
    };
    std::array<double, 2> lo{0, 1}, hi{1, 0};
    std::array<double, 2> x = sr;
    if (!(x[0] > 0 && x[1] > 0)) x = {0.5, 0.5};
    for (int it = 0; it < kMaxIter; ++it) {
      const Slacks ll = slacks_at(x);
      double d1, d2;
      derivs(ll, d1, d2);
      if (d1 > 0)
        lo = x;
      else
        hi = x;
      const double step = -d1 / d2;
      if (std::abs(d1) <= 0.1 * eps || std::abs(d1) <= 64 * std::numeric_limits<double>::epsilon() * noise ||
          std::min(hi[0] - lo[0], lo[1] - hi[1]) <= 0) {
        sr = x;
        l = ll;
        y = x[0] <= x[1] ? Point2{seg.p[0] + x[0] * d[0], seg.p[1] + x[0] * d[1]}
                         : Point2{seg.q[0] - x[1] * d[0], seg.q[1] - x[1] * d[1]};
        return;
      }
      std::array<double, 2> next{x[0] + step, x[1] - step};
      if (!(next[0] > lo[0] && next[0] < hi[0] && next[1] > hi[1] && next[1] < lo[1])) {
        // Overshoot: close 95% of the gap to the bracket end in that direction.
        const auto& end = step > 0 ? hi : lo;
        next = {x[0] + 0.95 * (end[0] - x[0]), x[1] + 0.95 * (end[1] - x[1])};
      }
      x = next;
    }
    throw Error(ErrorCode::OptimizationFailed, "crease search for the Legendre transform did not converge");
  }

  LegendreResult operator()(const Point2& x, LegendreCache* cache) const {
    const double t = u.t_;
    LegendreResult best{-std::numeric_limits<double>::infinity(), {0, 0}};
    auto consider = [&](const Point2& y, const Slacks& l) {
      const double val = x[0] * y[0] + x[1] * y[1] - u.u0(l) - t * u.f(y);
      if (val > best.value) best = {val, y};
    };
    if (cache && cache->pieces.size() != u.pieces_.size()) cache->pieces.assign(u.pieces_.size(), {});
    if (cache && cache->creases.size() != u.creases_.size()) cache->creases.assign(u.creases_.size(), {0.5, 0.5});
    const std::size_t k_eff = (t == 0) ? 1 : u.pieces_.size();
    for (std::size_t k = 0; k < k_eff; ++k) {
      const auto& pc = u.pieces_[k];
      const Point2 z{x[0] - t * pc.a[0], x[1] - t * pc.a[1]};
      Point2 y{0, 0};
      Slacks l{};
      for (std::size_t i = 0; i < u.m_; ++i) l[i] = u.offset_[i];
      if (cache && cache->pieces[k].valid &&
          *std::min_element(cache->pieces[k].l.begin(), cache->pieces[k].l.begin() + u.m_) >= 1e-200) {
        y = cache->pieces[k].y;
        l = cache->pieces[k].l;
        // Resynchronize slacks that y itself determines accurately.
        const Slacks fresh = u.slacks(y);
        for (std::size_t i = 0; i < u.m_; ++i)
          if (fresh[i] > 1e-3) l[i] = fresh[i];
      }
      centre(z, y, l);
      if (cache) cache->pieces[k] = {y, l, true};
      consider(y, l);
    }
    if (t == 0) return best;
    for (std::size_t c = 0; c < u.creases_.size(); ++c) {
      const auto& seg = u.creases_[c];
      const auto& pc = u.pieces_[seg.piece];
      const Point2 w{x[0] - t * pc.a[0], x[1] - t * pc.a[1]};
      std::array<double, 2> sr = cache ? cache->creases[c] : std::array<double, 2>{0.5, 0.5};
      Point2 y;
      Slacks l;
      chord(seg, w, sr, y, l);
      if (cache) cache->creases[c] = sr;
      consider(y, l);
    }
    for (const auto& fx : u.corners_) consider(fx.y, fx.l);
    return best;
  }
};

/// phi_t(x) = max_{y in P} <x, y> - u_t(y) and its maximizer.
inline LegendreResult legendre(const SymplecticPotential& u, const Point2& x, double eps_opt = 1e-10,
                               LegendreCache* cache = nullptr) {
  return LegendreSolver{u, eps_opt}(x, cache);
}

/// phi_t as an evaluation oracle.
class KahlerPotential {
 public:
  KahlerPotential(SymplecticPotential u, double eps_opt = 1e-10) : u_(std::move(u)), eps_(eps_opt) {}
  LegendreResult operator()(const Point2& x) const { return legendre(u_, x, eps_, &cache_); }
  const SymplecticPotential& potential() const { return u_; }
  double tolerance() const { return eps_; }

 private:
  SymplecticPotential u_;
  double eps_;
  mutable LegendreCache cache_;
};

struct PartitionResult {
  double t = 0;
  double v = 0;           // -log Z
  double log_z = 0;
  double mean_f = 0;      // int f(y_t) e^{-phi_t} / Z
  Point2 moment{0, 0};    // int y_t e^{-phi_t} / Z
  double radius = 0;      // truncation box half-width
  double tail_bound = 0;  // relative mass bound outside the box
  double rel_error = 0;   // quadrature error estimate relative to Z
  int intervals = 0;
  long evaluations = 0;
};

namespace detail {

/// Half-width R with tail mass beyond R at most `target` for e^{M - r|x|}.
inline double truncation_radius(std::size_t n, double m, double r, double target, double cap) {
  double radius;
  if (n == 1) {
    radius = (m - std::log(target * r / 2)) / r;
  } else {
    // 2 pi e^{M - rR} (R/r + 1/r^2) <= target, by fixed point on R.
    radius = std::max(1.0, m / r);
    for (int i = 0; i < 200; ++i) {
      const double next = (m + std::log(2 * std::numbers::pi * (radius / r + 1 / (r * r)) / target)) / r;
      if (std::abs(next - radius) < 1e-12 * (1 + radius)) break;
      radius = next;
    }
  }
  if (!(radius <= cap)) throw Error(ErrorCode::TailBoundFailure, "truncation radius " + std::to_string(radius) + " exceeds cap");
  return std::max(radius, 1.0);
}

inline double tail_mass(std::size_t n, double m, double r, double radius) {
  if (n == 1) return 2 * std::exp(m - r * radius) / r;
  return 2 * std::numbers::pi * std::exp(m - r * radius) * (radius / r + 1 / (r * r));
}

}  // namespace detail

namespace detail {

/// One adaptive pass over the box [-R, R]^n of the scaled integrand
/// e^{-(phi_t - phi_min)} * [1, f(y_t), y_t]; `weights` select the
/// components that drive refinement.
inline quad::Result<4> partition_pass(const SymplecticPotential& u, const DingParams& prm, double phi_min, double z_lb,
                                      double radius, const quad::Values<4>& weights) {
  LegendreCache cache;
  auto integrand = [&](double x1, double x2) {
    // Points where e^{-phi} is certainly below e^{-250} relative to the
    // peak are skipped.
    if (u.phi_lower(Point2{x1, x2}) - phi_min > 250) return quad::Values<4>{0, 0, 0, 0};
    const auto res = legendre(u, Point2{x1, x2}, prm.eps_opt, &cache);
    const double w = std::exp(-(res.value - phi_min));
    return quad::Values<4>{w, u.f(res.argmax) * w, res.argmax[0] * w, res.argmax[1] * w};
  };
  quad::Options<4> outer;
  outer.error_weights = weights;
  outer.abs_tol = 0.4 * prm.eps_quad * z_lb;
  outer.rel_tol = 0.4 * prm.eps_quad;
  outer.initial_pieces = 16;
  if (u.dim() == 1) {
    outer.max_intervals = 8000;
    return quad::integrate<4>([&](double x) { return integrand(x, 0); }, -radius, radius, outer);
  }
  quad::Options<4> inner = outer;
  inner.abs_tol = 0.2 * prm.eps_quad * z_lb / (2 * radius);
  inner.rel_tol = 0;
  inner.max_intervals = 3000;
  outer.max_intervals = 3000;
  double inner_err = 0;
  long inner_evals = 0;
  auto res = quad::integrate<4>(
      [&](double x1) {
        auto row = quad::integrate<4>([&](double x2) { return integrand(x1, x2); }, -radius, radius, inner);
        inner_err = std::max(inner_err, row.error);
        inner_evals += row.evaluations;
        return row.value;
      },
      -radius, radius, outer);
  res.error += 2 * radius * inner_err;
  res.evaluations = inner_evals;
  return res;
}

}  // namespace detail

/// Z(t) = int e^{-phi_t} and v(t) = -log Z(t), together with the f- and
/// y-moments of the measure.
inline PartitionResult partition_value(const SymplecticPotential& u, const DingParams& prm = {}) {
  const std::size_t n = u.dim();
  // phi_t >= -u_t(0) with equality where y_t = 0; integrate e^{-(phi - phi_min)}.
  const double phi_min = -u(Point2{0, 0});
  const double d = std::max(u.diameter(), 1e-300);
  const double z_lb = (n == 1) ? 2 / d : 2 * std::numbers::pi / (d * d);  // lower bound for the scaled Z
  const double m_scaled = u.max_value() + phi_min;  // envelope e^{M - r|x|} after scaling by e^{phi_min}
  const double r = u.inradius();
  const double radius = detail::truncation_radius(n, m_scaled, r, 1e-2 * prm.eps_quad * z_lb, prm.radius_cap);

  PartitionResult out;
  out.t = u.time();
  out.radius = radius;
  const quad::Values<4> with_f{1.0, 1.0 / (1.0 + u.f_bound()), 0, 0};
  quad::Result<4> mass, fm;
  if (u.time() == 0) {
    // Z(0) and the y-moments come from a mesh refined on e^{-phi_0} alone,
    // so they are the same for every f.
    mass = detail::partition_pass(u, prm, phi_min, z_lb, radius, {1.0, 0, 0, 0});
    fm = detail::partition_pass(u, prm, phi_min, z_lb, radius, with_f);
  } else {
    mass = fm = detail::partition_pass(u, prm, phi_min, z_lb, radius, with_f);
  }
  const double z = mass.value[0];
  out.rel_error = std::max(mass.error / z, fm.error / fm.value[0]);
  out.tail_bound = detail::tail_mass(n, m_scaled, r, radius) / z;
  out.log_z = std::log(z) - phi_min;
  out.v = -out.log_z;
  out.mean_f = fm.value[1] / fm.value[0];
  out.moment = {mass.value[2] / z, mass.value[3] / z};
  out.intervals = mass.intervals;
  out.evaluations = mass.evaluations + (u.time() == 0 ? fm.evaluations : 0);
  return out;
}

inline PartitionResult partition_value(const ToricFano& x, const PLConvexFn& f, double t, const DingParams& prm = {}) {
  return partition_value(SymplecticPotential(x, f, t), prm);
}

struct VPrime {
  double direct = 0;             // -int f(y_t) e^{-phi_t} / Z
  double finite_difference = 0;  // from v at neighbouring times
  PartitionResult at_t;
};

/// v'(t) by the envelope formula, cross-checked against a finite difference
/// of v (centred, or third-order one-sided near t = 0).
inline VPrime v_prime(const ToricFano& x, const PLConvexFn& f, double t, const DingParams& prm = {}) {
  VPrime out;
  out.at_t = partition_value(x, f, t, prm);
  out.direct = -out.at_t.mean_f;
  const double h = prm.fd_step;
  if (t >= h) {
    const double vp = partition_value(x, f, t + h, prm).v;
    const double vm = partition_value(x, f, t - h, prm).v;
    out.finite_difference = (vp - vm) / (2 * h);
  } else {
    const double v1 = partition_value(x, f, t + h, prm).v;
    const double v2 = partition_value(x, f, t + 2 * h, prm).v;
    const double v3 = partition_value(x, f, t + 3 * h, prm).v;
    out.finite_difference = (-11 * out.at_t.v + 18 * v1 - 9 * v2 + 2 * v3) / (6 * h);
  }
  const double gap = std::abs(out.direct - out.finite_difference);
  if (gap > prm.cross_check_tol * (1 + std::abs(out.direct)))
    throw Error(ErrorCode::CrossCheckFailed, "v'(" + std::to_string(t) + "): envelope " + std::to_string(out.direct) +
                                                 " vs finite difference " + std::to_string(out.finite_difference));
  return out;
}

/// dE/dt = -n! int_P f, constant along the ray.
inline BigRational energy_slope(const ToricFano& x, const PLConvexFn& f) {
  return -BigRational(factorial(x.dim())) * integrate_pl(x.polytope(), f);
}

inline double ding_slope_from(const ToricFano& x, const PLConvexFn& f, double v_derivative) {
  return to_double(-energy_slope(x, f) / x.degree()) + v_derivative;
}

/// d/dt D(phi_t) = -(1/V) dE/dt + v'(t).
inline double ding_slope(const ToricFano& x, const PLConvexFn& f, double t, const DingParams& prm = {}) {
  return ding_slope_from(x, f, v_prime(x, f, t, prm).direct);
}

/// Second differences (v[i-1] - 2 v[i] + v[i+1]) / h^2 of equally spaced samples.
inline std::vector<double> convexity_check(const std::vector<double>& v, double h) {
  if (v.size() < 3) throw Error(ErrorCode::SchemaViolation, "convexity check needs at least 3 samples");
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) out.push_back((v[i - 1] - 2 * v[i] + v[i + 1]) / (h * h));
  return out;
}

struct SlopeSample {
  double t = 0;
  double v = 0;
  double v_deriv = 0;
  double v_deriv_fd = 0;
  double ding_slope = 0;
  double radius = 0;
  double tail_bound = 0;
  double rel_error = 0;
  int intervals = 0;
  long evaluations = 0;
};

struct SlopeReport {
  std::vector<SlopeSample> samples;
  BigRational energy_slope;
  double extrapolated_limit = 0;
  std::vector<double> convexity_residuals;  // divided second differences over the schedule
  BigRational target_minus_df;
  double q_hat_numeric = 0;
  DingParams params;

  std::vector<double> t_samples() const { return column(&SlopeSample::t); }
  std::vector<double> v_values() const { return column(&SlopeSample::v); }
  std::vector<double> v_derivs() const { return column(&SlopeSample::v_deriv); }
  std::vector<double> ding_slopes() const { return column(&SlopeSample::ding_slope); }

 private:
  std::vector<double> column(double SlopeSample::*field) const {
    std::vector<double> out;
    for (const auto& s : samples) out.push_back(s.*field);
    return out;
  }
};

namespace detail {

/// Runs `task(i)` for i < count on up to `jobs` threads, each index exactly once.
template <class F>
void parallel_for(std::size_t count, unsigned jobs, F&& task) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j)
    pool.emplace_back([&, j] {
      for (std::size_t i = j; i < count; i += jobs) {
        try {
          task(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Runs the schedule, checks monotonicity of the slopes and extrapolates
/// the limit by a secant in 1/t through the last two samples.
inline SlopeReport slope_limit(const ToricFano& x, const PLConvexFn& f, const DingParams& prm = {}) {
  if (prm.schedule.size() < 2) throw Error(ErrorCode::SchemaViolation, "schedule needs at least two times");
  for (std::size_t i = 0; i < prm.schedule.size(); ++i)
    if (!(prm.schedule[i] > 0) || (i > 0 && !(prm.schedule[i] > prm.schedule[i - 1])))
      throw Error(ErrorCode::SchemaViolation, "schedule must be positive and increasing");

  SlopeReport rep;
  rep.params = prm;
  rep.energy_slope = energy_slope(x, f);
  rep.target_minus_df = -df(x, f);
  rep.samples.resize(prm.schedule.size());
  detail::parallel_for(prm.schedule.size(), prm.jobs, [&](std::size_t i) {
    const double t = prm.schedule[i];
    const VPrime vp = v_prime(x, f, t, prm);
    auto& s = rep.samples[i];
    s.t = t;
    s.v = vp.at_t.v;
    s.v_deriv = vp.direct;
    s.v_deriv_fd = vp.finite_difference;
    s.ding_slope = ding_slope_from(x, f, vp.direct);
    s.radius = vp.at_t.radius;
    s.tail_bound = vp.at_t.tail_bound;
    s.rel_error = vp.at_t.rel_error;
    s.intervals = vp.at_t.intervals;
    s.evaluations = vp.at_t.evaluations;
  });

  for (std::size_t i = 1; i < rep.samples.size(); ++i) {
    const auto& a = rep.samples[i - 1];
    const auto& b = rep.samples[i];
    const double tol = 2 * (a.rel_error + b.rel_error) * (1 + std::abs(a.ding_slope) + std::abs(b.ding_slope)) + 1e-7;
    if (b.ding_slope < a.ding_slope - tol)
      throw Error(ErrorCode::MonotonicityViolation, "Ding slope decreases from t = " + std::to_string(a.t) +
                                                        " to t = " + std::to_string(b.t));
  }
  for (std::size_t i = 1; i + 1 < rep.samples.size(); ++i) {
    const auto& a = rep.samples[i - 1];
    const auto& b = rep.samples[i];
    const auto& c = rep.samples[i + 1];
    rep.convexity_residuals.push_back(2 * ((c.v - b.v) / (c.t - b.t) - (b.v - a.v) / (b.t - a.t)) / (c.t - a.t));
  }
  const auto& s1 = rep.samples[rep.samples.size() - 2];
  const auto& s2 = rep.samples.back();
  const double k = (s1.ding_slope - s2.ding_slope) / (1 / s1.t - 1 / s2.t);
  rep.extrapolated_limit = s2.ding_slope - k / s2.t;
  rep.q_hat_numeric = to_double(rep.target_minus_df) - rep.extrapolated_limit;
  return rep;
}

}  // namespace kstab
