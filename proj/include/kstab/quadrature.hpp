#pragma once

// Adaptive Gauss-Kronrod (7/15) for vector-valued integrands on an interval.
// Global error control: the interval with the largest weighted error estimate
// is bisected until the total estimate meets the tolerance. The final sum is
// taken in left-to-right order with compensation, so results do not depend on
// the refinement order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <queue>
#include <vector>

namespace kstab::quad {

template <std::size_t K>
using Values = std::array<double, K>;

template <std::size_t K>
struct Options {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  Values<K> error_weights{};  // error norm = sum_k w_k |err_k|; component 0 is the default
  int initial_pieces = 1;
  int max_intervals = 4000;

  Options() { error_weights[0] = 1.0; }
};

template <std::size_t K>
struct Result {
  Values<K> value{};
  double error = 0;  // weighted norm of the error estimate
  int intervals = 0;
  long evaluations = 0;
  bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851, 0.864864423359769072789712788640926,
    0.741531185599394439863864773280788, 0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204, 0.104790010322250183839876322541518,
    0.140653259715525918745189590510238, 0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd Kronrod nodes (1, 3, 5) and the centre.
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780, 0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <std::size_t K>
struct Segment {
  double a, b;
  Values<K> value, error;
  double norm;
  bool operator<(const Segment& o) const { return norm < o.norm; }
};

template <std::size_t K, class F>
Segment<K> rule(F& f, double a, double b, const Values<K>& w) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  Values<K> kr{}, ga{};
  auto add = [&](const Values<K>& v, double wk, double wg) {
    for (std::size_t k = 0; k < K; ++k) {
      kr[k] += wk * v[k];
      ga[k] += wg * v[k];
    }
  };
  add(f(c), kronrod_weights[7], gauss_weights[3]);
  for (int i = 0; i < 7; ++i) {
    const double wg = (i % 2 == 1) ? gauss_weights[i / 2] : 0.0;
    add(f(c - h * kronrod_nodes[i]), kronrod_weights[i], wg);
    add(f(c + h * kronrod_nodes[i]), kronrod_weights[i], wg);
  }
  Segment<K> s{a, b, {}, {}, 0};
  for (std::size_t k = 0; k < K; ++k) {
    s.value[k] = h * kr[k];
    s.error[k] = std::abs(h * (kr[k] - ga[k]));
    s.norm += w[k] * s.error[k];
  }
  return s;
}

}  // namespace detail

/// Neumaier-compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0, comp_ = 0;
};

template <std::size_t K, class F>
Result<K> integrate(F&& f, double a, double b, const Options<K>& opt) {
  std::priority_queue<detail::Segment<K>> heap;
  const int pieces = std::max(1, opt.initial_pieces);
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces;
    const double hi = (i + 1 == pieces) ? b : a + (b - a) * (i + 1) / pieces;
    heap.push(detail::rule<K>(f, lo, hi, opt.error_weights));
  }
  Result<K> res;
  res.evaluations = 15L * pieces;
  auto totals = [&](double& err, double& scale) {
    auto copy = heap;
    err = 0;
    Values<K> val{};
    while (!copy.empty()) {
      err += copy.top().norm;
      for (std::size_t k = 0; k < K; ++k) val[k] += copy.top().value[k];
      copy.pop();
    }
    scale = 0;
    for (std::size_t k = 0; k < K; ++k) scale += opt.error_weights[k] * std::abs(val[k]);
  };
  double err = 0, scale = 0;
  totals(err, scale);
  // Running sums avoid re-scanning the heap each step; recomputed exactly at the end.
  while (err > std::max(opt.abs_tol, opt.rel_tol * scale) && static_cast<int>(heap.size()) < opt.max_intervals) {
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    auto left = detail::rule<K>(f, worst.a, mid, opt.error_weights);
    auto right = detail::rule<K>(f, mid, worst.b, opt.error_weights);
    res.evaluations += 30;
    err += left.norm + right.norm - worst.norm;
    for (std::size_t k = 0; k < K; ++k) scale += opt.error_weights[k] * (std::abs(left.value[k] + right.value[k]) - std::abs(worst.value[k]));
    heap.push(left);
    heap.push(right);
    if (heap.size() % 64 == 0) totals(err, scale);
  }
  std::vector<detail::Segment<K>> segs;
  segs.reserve(heap.size());
  while (!heap.empty()) {
    segs.push_back(heap.top());
    heap.pop();
  }
  std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
  std::array<CompensatedSum, K> sums;
  CompensatedSum errsum;
  for (const auto& s : segs) {
    for (std::size_t k = 0; k < K; ++k) sums[k].add(s.value[k]);
    errsum.add(s.norm);
  }
  for (std::size_t k = 0; k < K; ++k) res.value[k] = sums[k].value();
  res.error = errsum.value();
  res.intervals = static_cast<int>(segs.size());
  scale = 0;
  for (std::size_t k = 0; k < K; ++k) scale += opt.error_weights[k] * std::abs(res.value[k]);
  res.converged = res.error <= std::max(opt.abs_tol, opt.rel_tol * scale);
  return res;
}

}  // namespace kstab::quad
