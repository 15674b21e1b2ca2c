#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "kstab/ding.hpp"

using namespace kstab;
using namespace kstab::testing;

namespace {

// ---------------------------------------------------------------------------
// Oracle: push e^{-phi_t} dx forward to P. On the region where piece j is
// maximal, x = grad u0(y) + t a_j and e^{-phi_t} dx = e^{t c_j} rho(y) dy with
// rho = prod_i l_i e^{1 - l_i} * det(sum_i v_i v_i^T / l_i), a bounded smooth
// function. Creases and crease corners carry the rest of R^n: over them x
// ranges over grad u0(y) + t * conv(active gradients).

struct Gauss {
  std::vector<double> x, w;  // on [0, 1]
  explicit Gauss(int n) {
    for (int i = 1; i <= n; ++i) {
      double z = std::cos(std::numbers::pi * (i - 0.25) / (n + 0.5));
      double dp = 0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1, p1 = z;
        for (int k = 2; k <= n; ++k) {
          const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1);
        const double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-16) break;
      }
      x.push_back(0.5 * (1 - z));
      w.push_back(1 / ((1 - z * z) * dp * dp));
    }
  }
};

using Vals = std::array<double, 4>;  // [1, f, y1, y2] moments

struct PushforwardOracle {
  const LatticePolytope& p;
  const PLConvexFn& f;
  double t;
  Gauss gauss{32};

  std::size_t n() const { return p.dim(); }

  std::vector<double> slacks(const std::array<double, 2>& y) const {
    std::vector<double> l;
    for (const auto& fc : p.facets()) {
      double s = static_cast<double>(fc.offset);
      for (std::size_t j = 0; j < n(); ++j) s += fc.normal[j] * y[j];
      l.push_back(s);
    }
    return l;
  }
  double piece(std::size_t j, const std::array<double, 2>& y) const {
    double s = to_double(f.pieces()[j].constant);
    for (std::size_t k = 0; k < n(); ++k) s += to_double(f.pieces()[j].gradient[k]) * y[k];
    return s;
  }
  double fval(const std::array<double, 2>& y) const {
    double best = -1e300;
    for (std::size_t j = 0; j < f.pieces().size(); ++j) best = std::max(best, piece(j, y));
    return best;
  }
  // prod_i l_i e^{1 - l_i}.
  double weight(const std::vector<double>& l) const {
    double w = 1;
    for (double s : l) w *= s * std::exp(1 - s);
    return w;
  }
  double normal(std::size_t i, std::size_t k) const { return static_cast<double>(p.facets()[i].normal[k]); }
  // rho(y) by Cauchy-Binet.
  double rho(const std::array<double, 2>& y) const {
    const auto l = slacks(y);
    const std::size_t m = l.size();
    double base = 1;
    for (double s : l) base *= std::exp(1 - s);
    double sum = 0;
    if (n() == 1) {
      for (std::size_t i = 0; i < m; ++i) {
        double term = normal(i, 0) * normal(i, 0);
        for (std::size_t k = 0; k < m; ++k)
          if (k != i) term *= l[k];
        sum += term;
      }
    } else {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
          const double d = normal(i, 0) * normal(j, 1) - normal(i, 1) * normal(j, 0);
          double term = d * d;
          for (std::size_t k = 0; k < m; ++k)
            if (k != i && k != j) term *= l[k];
          sum += term;
        }
    }
    return base * sum;
  }

  void add(Vals& acc, double w, const std::array<double, 2>& y) const {
    acc[0] += w;
    acc[1] += w * fval(y);
    acc[2] += w * y[0];
    acc[3] += w * y[1];
  }

  template <class G>
  void on_segment(const std::array<double, 2>& a, const std::array<double, 2>& b, G&& g) const {
    const double len = std::hypot(b[0] - a[0], b[1] - a[1]);
    for (std::size_t i = 0; i < gauss.x.size(); ++i) {
      const double s = gauss.x[i];
      g(std::array<double, 2>{a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])}, gauss.w[i] * len);
    }
  }
  // Duffy-collapsed tensor Gauss rule on a triangle.
  template <class G>
  void on_triangle(const std::array<double, 2>& a, const std::array<double, 2>& b, const std::array<double, 2>& c,
                   G&& g) const {
    const double area2 = std::abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    for (std::size_t i = 0; i < gauss.x.size(); ++i)
      for (std::size_t j = 0; j < gauss.x.size(); ++j) {
        const double u = gauss.x[i], v = gauss.x[j];
        const std::array<double, 2> y{a[0] + u * (b[0] - a[0]) + u * v * (c[0] - b[0]),
                                      a[1] + u * (b[1] - a[1]) + u * v * (c[1] - b[1])};
        g(y, gauss.w[i] * gauss.w[j] * u * area2);
      }
  }
  template <class G>
  void on_polygon(std::vector<std::array<double, 2>> pts, G&& g) const {
    double cx = 0, cy = 0;
    for (auto& q : pts) {
      cx += q[0];
      cy += q[1];
    }
    cx /= pts.size();
    cy /= pts.size();
    std::sort(pts.begin(), pts.end(), [&](const auto& a, const auto& b) {
      return std::atan2(a[1] - cy, a[0] - cx) < std::atan2(b[1] - cy, b[0] - cx);
    });
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) on_triangle(pts[0], pts[i], pts[i + 1], g);
  }

  static std::array<double, 2> dbl(const RatPoint& y) {
    return {to_double(y[0]), y.size() > 1 ? to_double(y[1]) : 0.0};
  }

  std::vector<RatPoint> cell(const std::vector<std::size_t>& maximal, const std::vector<std::pair<std::size_t, std::size_t>>& equal) const {
    std::vector<RatPoint> g;
    std::vector<BigRational> h;
    for (const auto& fc : p.facets()) {
      g.push_back(to_rational(fc.normal));
      h.emplace_back(fc.offset);
    }
    const auto& ps = f.pieces();
    for (auto j : maximal)
      for (std::size_t k = 0; k < ps.size(); ++k) {
        const AffineFn d = ps[j] - ps[k];
        g.push_back(d.gradient);
        h.push_back(d.constant);
      }
    for (auto [j, k] : equal) {
      const AffineFn d = ps[k] - ps[j];
      g.push_back(d.gradient);
      h.push_back(d.constant);
    }
    // Brute-force vertex enumeration, independent of the library's solvers.
    std::vector<RatPoint> out;
    const std::size_t dim = n();
    auto feasible = [&](const RatPoint& y) {
      for (std::size_t r = 0; r < g.size(); ++r) {
        BigRational s = h[r];
        for (std::size_t c = 0; c < dim; ++c) s += g[r][c] * y[c];
        if (s < 0) return false;
      }
      return true;
    };
    for (std::size_t r1 = 0; r1 < g.size(); ++r1) {
      if (dim == 1) {
        if (g[r1][0] == 0) continue;
        RatPoint y{-h[r1] / g[r1][0]};
        if (feasible(y)) out.push_back(y);
        continue;
      }
      for (std::size_t r2 = r1 + 1; r2 < g.size(); ++r2) {
        const BigRational det = g[r1][0] * g[r2][1] - g[r1][1] * g[r2][0];
        if (det == 0) continue;
        RatPoint y{(-h[r1] * g[r2][1] + h[r2] * g[r1][1]) / det, (-g[r1][0] * h[r2] + g[r2][0] * h[r1]) / det};
        if (feasible(y)) out.push_back(y);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool interior(const RatPoint& y) const {
    for (const auto& fc : p.facets()) {
      BigRational s = fc.offset;
      for (std::size_t c = 0; c < n(); ++c) s += fc.normal[c] * y[c];
      if (s <= 0) return false;
    }
    return true;
  }

  Vals run() const {
    Vals acc{0, 0, 0, 0};
    const auto& ps = f.pieces();
    const std::size_t k = ps.size();
    // Smooth parts.
    for (std::size_t j = 0; j < k; ++j) {
      auto verts = cell({j}, {});
      const double scale = std::exp(t * to_double(ps[j].constant));
      auto g = [&](const std::array<double, 2>& y, double w) { add(acc, w * scale * rho(y), y); };
      if (n() == 1) {
        if (verts.size() == 2) on_segment(dbl(verts[0]), dbl(verts[1]), g);
      } else if (verts.size() >= 3) {
        std::vector<std::array<double, 2>> pts;
        for (auto& v : verts) pts.push_back(dbl(v));
        on_polygon(pts, g);
      }
    }
    if (t == 0) return acc;
    auto grad = [&](std::size_t j) { return dbl(ps[j].gradient); };
    // Corners: 1-d crease points and 2-d points where three or more pieces meet.
    std::vector<RatPoint> corners;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        if (n() == 1) {
          for (auto& y : cell({i}, {{i, j}}))
            if (interior(y)) corners.push_back(y);
          continue;
        }
        for (std::size_t l = j + 1; l < k; ++l)
          for (auto& y : cell({i}, {{i, j}, {i, l}}))
            if (interior(y)) corners.push_back(y);
      }
    std::sort(corners.begin(), corners.end());
    corners.erase(std::unique(corners.begin(), corners.end()), corners.end());
    for (const auto& yr : corners) {
      const BigRational top = f(yr);
      std::vector<std::array<double, 2>> w;
      for (std::size_t j = 0; j < k; ++j)
        if (ps[j](yr) == top) w.push_back(grad(j));
      const auto y = dbl(yr);
      const double base = weight(slacks(y));
      const double fy = to_double(top);
      auto g = [&](const std::array<double, 2>& a, double wt) {
        const double e = std::exp(t * (fy - a[0] * y[0] - a[1] * y[1]));
        add(acc, wt * std::pow(t, static_cast<double>(n())) * base * e, y);
      };
      if (n() == 1) {
        std::sort(w.begin(), w.end());
        on_segment(w.front(), w.back(), g);
      } else {
        on_polygon(w, g);
      }
    }
    if (n() == 1) return acc;
    // Crease edges.
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = i + 1; j < k; ++j) {
        auto ends = cell({i}, {{i, j}});
        if (ends.size() != 2) continue;
        const auto a = dbl(ends[0]), b = dbl(ends[1]);
        const std::array<double, 2> d{b[0] - a[0], b[1] - a[1]};
        const auto gi = grad(i), gj = grad(j);
        const std::array<double, 2> da{gi[0] - gj[0], gi[1] - gj[1]};
        const double ci = to_double(ps[i].constant), cj = to_double(ps[j].constant);
        const double dc = t * (ci - cj);
        const double sfac = std::abs(dc) < 1e-12 ? std::exp(t * cj) : std::exp(t * cj) * std::expm1(dc) / dc;
        const double len = std::hypot(d[0], d[1]);
        on_segment(a, b, [&](const std::array<double, 2>& y, double wt) {
          const auto l = slacks(y);
          // e^{-E} H d, bounded up to the ends of the crease.
          std::array<double, 2> hd{0, 0};
          for (std::size_t r = 0; r < l.size(); ++r) {
            double c = (normal(r, 0) * d[0] + normal(r, 1) * d[1]);
            for (std::size_t q = 0; q < l.size(); ++q)
              if (q != r) c *= l[q];
            hd[0] += normal(r, 0) * c;
            hd[1] += normal(r, 1) * c;
          }
          double base = 1;
          for (double s : l) base *= std::exp(1 - s);
          const double jac = std::abs(hd[0] * da[1] - hd[1] * da[0]) * base / len;
          add(acc, wt * t * jac * sfac, y);
        });
      }
    return acc;
  }
};

struct OracleResult {
  double log_z, mean_f;
  Point2 moment;
};

OracleResult oracle(const LatticePolytope& p, const PLConvexFn& f, double t) {
  const Vals v = PushforwardOracle{p, f, t}.run();
  return {std::log(v[0]), v[1] / v[0], {v[2] / v[0], v[3] / v[0]}};
}

LatticePolytope hexagon() { return make_polytope({{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}); }

PLConvexFn relu(BigRational shift = 0) { return PLConvexFn({linear_fn({0}), AffineFn{{1}, -shift}}); }

// Grid search with repeated zooming around the best cell; g may be +inf.
template <class G>
double zoom_min(G&& g, std::size_t n, Point2 lo, Point2 hi) {
  double best = 1e300;
  Point2 arg{0, 0};
  const int steps = 120;
  for (int round = 0; round < 14; ++round) {
    const Point2 h{(hi[0] - lo[0]) / steps, (hi[1] - lo[1]) / steps};
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= (n == 1 ? 0 : steps); ++j) {
        const Point2 y{lo[0] + i * h[0], n == 1 ? 0.0 : lo[1] + j * h[1]};
        const double v = g(y);
        if (v < best) {
          best = v;
          arg = y;
        }
      }
    lo = {arg[0] - 3 * h[0], arg[1] - 3 * h[1]};
    hi = {arg[0] + 3 * h[0], arg[1] + 3 * h[1]};
  }
  return best;
}

double phi0_interval(double x) { return 2 * std::log(2 * std::cosh(x / 2)) - 2 * std::log(2.0); }

}  // namespace

// ---------------------------------------------------------------- oracle sanity

TEST(PushforwardOracle, ClosedFormsOnInterval) {
  EXPECT_NEAR(oracle(interval(), relu(), 0).log_z, std::log(4.0), 1e-13);
  for (double t : {1.0, 7.0, 40.0}) {
    auto r = oracle(interval(), relu(), t);
    EXPECT_NEAR(r.log_z, std::log(4 + t), 1e-12);
    EXPECT_NEAR(r.mean_f, 1 / (4 + t), 1e-12);
    r = oracle(interval(), relu(BigRational(1, 2)), t);
    EXPECT_NEAR(r.log_z, std::log(4.5 - 0.5 * std::exp(-t / 2)), 1e-12);
  }
}

// ------------------------------------------------------------------- legendre

TEST(Legendre, IntervalExamples) {
  SymplecticPotential u(from_polytope(interval()), relu(), 0);
  auto r = legendre(u, {0, 0});
  EXPECT_NEAR(r.value, 0, 1e-12);
  EXPECT_NEAR(r.argmax[0], 0, 1e-12);
  for (double x : {0.5, 3.0, 20.0, 60.0, -60.0, 150.0}) {
    r = legendre(u, {x, 0});
    EXPECT_NEAR(r.value, phi0_interval(x), 1e-10 * (1 + std::abs(x))) << x;
    EXPECT_NEAR(r.argmax[0], std::tanh(x / 2), 1e-12) << x;
  }
  EXPECT_NEAR(legendre(u, {80, 0}).value - (80 - 2 * std::log(2.0)), 0, 1e-12);
}

TEST(Legendre, ValueAtOriginIsMinusMinimum) {
  std::mt19937_64 rng(4);
  for (const auto& p : {interval(), p2_triangle(), f1_trapezoid()}) {
    auto x = from_polytope(p);
    for (int trial = 0; trial < 3; ++trial) {
      auto f = random_pl(rng, p.dim(), 3);
      SymplecticPotential u(x, f, 1.5);
      const double lo = zoom_min([&](const Point2& y) { return u(y); }, p.dim(), {-1, -1}, {2, 2});
      const double phi = legendre(u, {0, 0}).value;
      EXPECT_LE(-phi, lo + 1e-10);
      EXPECT_NEAR(-phi, lo, 1e-8);
    }
  }
}

TEST(Legendre, FenchelYoungAndGradient) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> coord(-12, 12), unit(0, 1);
  const double eps = 1e-10;
  for (const auto& p : {interval(), p2_triangle(), square(), hexagon(), f1_trapezoid()}) {
    auto x = from_polytope(p);
    const std::size_t n = p.dim();
    for (double t : {0.0, 0.7, 6.0}) {
      KahlerPotential phi(SymplecticPotential(x, random_pl(rng, n, 3), t), eps);
      const auto& u = phi.potential();
      for (int trial = 0; trial < 40; ++trial) {
        Point2 xs{coord(rng), n == 2 ? coord(rng) : 0.0};
        const auto r = phi(xs);
        // Residual at the maximizer, with u_t recomputed from y alone.
        const double fy = xs[0] * r.argmax[0] + xs[1] * r.argmax[1] - u(r.argmax);
        EXPECT_LE(std::abs(fy - r.value), 1e-9 * (1 + std::abs(r.value)));
        // Fenchel's inequality at random points of P (convex combinations of vertices).
        for (int k = 0; k < 10; ++k) {
          Point2 y{0, 0};
          double total = 0;
          for (const auto& v : p.vertices()) {
            const double w = unit(rng);
            total += w;
            for (std::size_t c = 0; c < n; ++c) y[c] += w * v[c];
          }
          y = {y[0] / total, y[1] / total};
          EXPECT_LE(xs[0] * y[0] + xs[1] * y[1] - u(y), r.value + eps);
        }
        // Central differences of phi reproduce y_t away from kinks of y_t.
        const double h = 1e-4;
        for (std::size_t c = 0; c < n; ++c) {
          Point2 xp = xs, xm = xs;
          xp[c] += h;
          xm[c] -= h;
          const double slope = (phi(xp).value - phi(xm).value) / (2 * h);
          EXPECT_NEAR(slope, r.argmax[c], 1e-3);
        }
      }
    }
  }
}

TEST(Legendre, FarFromOrigin) {
  // Maximizers within e^{-700} of a vertex or an edge: slacks underflow.
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> angle(0, 2 * std::numbers::pi), radius(200, 2500);
  for (const auto& p : {interval(), p2_triangle(), square(), hexagon(), f1_trapezoid()}) {
    auto x = from_polytope(p);
    const std::size_t n = p.dim();
    for (double t : {0.0, 20.0}) {
      SymplecticPotential u(x, random_pl(rng, n, 3), t);
      for (int trial = 0; trial < 200; ++trial) {
        const double a = angle(rng), r = radius(rng);
        const Point2 xs = n == 2 ? Point2{r * std::cos(a), r * std::sin(a)} : Point2{a < std::numbers::pi ? r : -r, 0};
        LegendreResult res;
        ASSERT_NO_THROW(res = legendre(u, xs)) << xs[0] << "," << xs[1];
        const double scale = 1 + std::abs(res.value);
        EXPECT_LE(std::abs(xs[0] * res.argmax[0] + xs[1] * res.argmax[1] - u(res.argmax) - res.value), 1e-12 * scale);
        for (const auto& v : p.vertices()) {
          const Point2 y{double(v[0]), n == 2 ? double(v[1]) : 0.0};
          EXPECT_LE(xs[0] * y[0] + xs[1] * y[1] - u(y), res.value + 1e-12 * scale);
        }
      }
    }
  }
}

TEST(Legendre, MatchesGridSearch) {
  std::mt19937_64 rng(23);
  auto x = from_polytope(p2_triangle());
  for (int trial = 0; trial < 4; ++trial) {
    SymplecticPotential u(x, random_pl(rng, 2, 3), 2.0);
    const Point2 xs{1.5 * trial - 2, 1.0 - trial};
    const double best = -zoom_min([&](const Point2& y) { return u(y) - xs[0] * y[0] - xs[1] * y[1]; }, 2, {-1, -1}, {2, 2});
    const double phi = legendre(u, xs).value;
    EXPECT_GE(phi, best - 1e-10);
    EXPECT_NEAR(phi, best, 1e-8);
  }
}

TEST(Legendre, RejectsThreeDimensions) {
  auto x = from_polytope(make_polytope({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, -1, -1}}));
  try {
    SymplecticPotential u(x, PLConvexFn(linear_fn({0, 0, 0})), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionUnsupported);
  }
}

// ------------------------------------------------------------ partition value

TEST(PartitionValue, IntervalClosedForms) {
  auto x = from_polytope(interval());
  auto r = partition_value(x, relu(), 0);
  EXPECT_NEAR(r.v, -std::log(4.0), 1e-6);
  EXPECT_LE(r.rel_error, 1e-6);
  EXPECT_LE(r.tail_bound, 1e-6);
  for (double t : {2.0, 10.0, 40.0}) {
    r = partition_value(x, relu(), t);
    EXPECT_NEAR(r.v, -std::log(4 + t), 1e-6);
    EXPECT_NEAR(r.mean_f, 1 / (4 + t), 1e-6);
    EXPECT_NEAR(r.moment[0], 0, 1e-6);
  }
}

TEST(PartitionValue, MatchesPushforwardOracle) {
  std::mt19937_64 rng(31);
  struct Case {
    LatticePolytope p;
    std::size_t pieces;
    double t;
  };
  std::vector<Case> cases{{interval(), 3, 0.5}, {interval(), 4, 8.0},  {p2_triangle(), 1, 3.0},
                          {p2_triangle(), 2, 0}, {p2_triangle(), 3, 1.5}, {square(), 2, 4.0},
                          {hexagon(), 3, 2.0},   {f1_trapezoid(), 3, 1.0}, {p2_triangle(), 3, 20.0},
                          {interval(), 2, 40.0}};
  for (const auto& c : cases) {
    auto f = random_pl(rng, c.p.dim(), c.pieces);
    auto num = partition_value(from_polytope(c.p), f, c.t);
    auto ref = oracle(c.p, f, c.t);
    EXPECT_NEAR(num.log_z, ref.log_z, 2e-6) << c.t;
    EXPECT_NEAR(num.mean_f, ref.mean_f, 2e-6 * (1 + std::abs(ref.mean_f)));
    // Integration by parts: the y-moment of e^{-phi_t} vanishes.
    EXPECT_NEAR(ref.moment[0], 0, 1e-9);
    EXPECT_NEAR(ref.moment[1], 0, 1e-9);
    EXPECT_NEAR(num.moment[0], 0, 1e-5);
    EXPECT_NEAR(num.moment[1], 0, 1e-5);
  }
}

TEST(PartitionValue, ConstantShiftAndBasePoint) {
  std::mt19937_64 rng(37);
  for (const auto& p : {interval(), p2_triangle()}) {
    auto x = from_polytope(p);
    auto f = random_pl(rng, p.dim(), 2);
    const BigRational c(3, 4);
    const double t = 2.5;
    const double v = partition_value(x, f, t).v;
    const double vc = partition_value(x, f + AffineFn{RatPoint(p.dim(), BigRational(0)), c}, t).v;
    // phi_t shifts by -t c, so v shifts by -t c.
    EXPECT_NEAR(vc, v - t * to_double(c), 1e-9);
    EXPECT_EQ(partition_value(x, f, 0).v, partition_value(x, random_pl(rng, p.dim(), 3), 0).v);
  }
}

TEST(PartitionValue, TailBoundFailure) {
  DingParams prm;
  prm.radius_cap = 5;
  try {
    partition_value(from_polytope(interval()), relu(), 1, prm);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TailBoundFailure);
  }
}

// -------------------------------------------------------------------- slopes

TEST(VPrime, LinearFunctions) {
  auto x = from_polytope(interval());
  const BigRational c(2, 5);
  for (double t : {0.0, 1.0, 6.0}) {
    auto r = v_prime(x, PLConvexFn(AffineFn{{BigRational(1, 3)}, c}), t);
    EXPECT_NEAR(r.direct, -0.4, 1e-6);
    EXPECT_NEAR(r.finite_difference, -0.4, 1e-5);
  }
  auto tri = from_polytope(p2_triangle());
  auto r = v_prime(tri, PLConvexFn(AffineFn{{BigRational(1, 2), BigRational(-1, 3)}, BigRational(1, 5)}), 4);
  EXPECT_NEAR(r.direct, -0.2, 1e-6);
}

TEST(VPrime, ReluApproachesZero) {
  auto x = from_polytope(interval());
  double prev = -1;
  for (double t : {10.0, 20.0, 40.0}) {
    auto r = v_prime(x, relu(), t);
    EXPECT_NEAR(r.direct, -1 / (4 + t), 1e-6);
    EXPECT_NEAR(r.finite_difference, -1 / (4 + t), 1e-5);
    EXPECT_LT(r.direct, 0);
    EXPECT_GT(r.direct, prev);
    prev = r.direct;
  }
  auto r0 = v_prime(x, relu(), 0);
  EXPECT_NEAR(r0.direct, -0.25, 1e-6);
  EXPECT_NEAR(r0.finite_difference, -0.25, 1e-5);
}

TEST(EnergySlope, Examples) {
  auto x = from_polytope(interval());
  EXPECT_EQ(energy_slope(x, relu()), BigRational(-1, 2));
  EXPECT_EQ(energy_slope(from_polytope(p2_triangle()), PLConvexFn(linear_fn({0, 0}))), 0);
  EXPECT_EQ(energy_slope(x, relu() * BigRational(7, 2)), BigRational(7, 2) * energy_slope(x, relu()));
  // n! int_P f on the triangle: the degree appears for f = 1.
  EXPECT_EQ(energy_slope(from_polytope(p2_triangle()), PLConvexFn(AffineFn{{0, 0}, 1})), -9);
}

TEST(DingSlope, ClosedFormAndGauge) {
  auto x = from_polytope(interval());
  for (double t : {0.0, 3.0, 12.0}) EXPECT_NEAR(ding_slope(x, relu(), t), 0.25 - 1 / (4 + t), 1e-6);
  std::mt19937_64 rng(41);
  for (const auto& p : {interval(), p2_triangle()}) {
    auto xp = from_polytope(p);
    auto f = random_pl(rng, p.dim(), 2);
    AffineFn c{RatPoint(p.dim(), BigRational(0)), BigRational(-5, 3)};
    EXPECT_NEAR(ding_slope(xp, f + c, 2), ding_slope(xp, f, 2), 1e-6);
  }
}

TEST(SlopeLimit, QZeroCase) {
  auto rep = slope_limit(from_polytope(interval()), relu());
  EXPECT_EQ(rep.target_minus_df, BigRational(1, 4));
  EXPECT_EQ(rep.energy_slope, BigRational(-1, 2));
  EXPECT_NEAR(rep.extrapolated_limit, 0.25, 5e-3);
  EXPECT_NEAR(rep.q_hat_numeric, 0, 5e-3);
  ASSERT_EQ(rep.samples.size(), 4u);
  ASSERT_EQ(rep.convexity_residuals.size(), 2u);
  for (double r : rep.convexity_residuals) EXPECT_GE(r, -1e-4);
  for (std::size_t i = 0; i < rep.samples.size(); ++i) {
    const double t = rep.samples[i].t;
    EXPECT_NEAR(rep.samples[i].ding_slope, 0.25 - 1 / (4 + t), 1e-6);
    EXPECT_LE(rep.samples[i].ding_slope, 0.25 + 5e-3);
    if (i > 0) {
      EXPECT_GE(rep.samples[i].ding_slope, rep.samples[i - 1].ding_slope);
    }
  }
  // The secant bracket: the last sample and the extrapolation straddle 1/4.
  EXPECT_LE(rep.samples.back().ding_slope, 0.25);
}

TEST(SlopeLimit, PositiveQCase) {
  auto x = from_polytope(interval());
  auto f = relu(BigRational(1, 2));
  auto rep = slope_limit(x, f);
  EXPECT_EQ(rep.target_minus_df, BigRational(3, 16));
  EXPECT_NEAR(rep.extrapolated_limit, 1.0 / 16, 5e-3);
  EXPECT_NEAR(rep.q_hat_numeric, 1.0 / 8, 5e-3);
  EXPECT_EQ(q_hat(x, f), BigRational(1, 8));
}

TEST(SlopeLimit, DeterministicAcrossJobs) {
  DingParams one, three;
  three.jobs = 3;
  auto a = slope_limit(from_polytope(interval()), relu(BigRational(1, 3)), one);
  auto b = slope_limit(from_polytope(interval()), relu(BigRational(1, 3)), three);
  EXPECT_EQ(a.v_values(), b.v_values());
  EXPECT_EQ(a.ding_slopes(), b.ding_slopes());
  EXPECT_EQ(a.extrapolated_limit, b.extrapolated_limit);
}

TEST(SlopeLimit, RejectsBadSchedules) {
  DingParams prm;
  prm.schedule = {5, 5};
  EXPECT_THROW(slope_limit(from_polytope(interval()), relu(), prm), Error);
  prm.schedule = {3};
  EXPECT_THROW(slope_limit(from_polytope(interval()), relu(), prm), Error);
}

TEST(ConvexityCheck, Examples) {
  auto x = from_polytope(interval());
  auto sample = [&](const PLConvexFn& f, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(partition_value(x, f, i).v);
    return v;
  };
  for (double r : convexity_check(sample(PLConvexFn(AffineFn{{BigRational(2, 3)}, BigRational(1, 4)}), 5), 1))
    EXPECT_NEAR(r, 0, 1e-6);
  for (double r : convexity_check(sample(relu(), 6), 1)) EXPECT_GE(r, -1e-4);
  for (double r : convexity_check(sample(PLConvexFn(AffineFn{{0}, BigRational(-3, 2)}), 4), 1)) EXPECT_NEAR(r, 0, 1e-9);
  EXPECT_THROW(convexity_check({1, 2}, 1), Error);
}
