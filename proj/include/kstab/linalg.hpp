#pragma once

// Exact small-dimension linear algebra shared by the integer (lattice) and
// rational code paths. Dimensions are tiny (n <= 4), so determinants go
// through Bareiss elimination and hyperplane normals through cofactors.

#include <cstdint>
#include <numeric>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "kstab/rational.hpp"

namespace kstab::linalg {

template <class T>
using Vec = std::vector<T>;
template <class T>
using Mat = std::vector<Vec<T>>;

template <class T>
struct Wide {
  using type = T;
};
template <>
struct Wide<std::int64_t> {
  using type = __int128;
};

template <class T>
using wide_t = typename Wide<T>::type;

template <class T>
T narrow(const wide_t<T>& v) {
  return static_cast<T>(v);
}

/// Bareiss fraction-free determinant; exact for integers and rationals.
template <class T>
wide_t<T> det_wide(const Mat<T>& m) {
  using W = wide_t<T>;
  const std::size_t n = m.size();
  if (n == 0) return W(1);
  std::vector<std::vector<W>> a(n, std::vector<W>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = W(m[i][j]);
  W sign(1), prev(1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (a[k][k] == 0) {
      std::size_t r = k + 1;
      while (r < n && a[r][k] == 0) ++r;
      if (r == n) return W(0);
      std::swap(a[k], a[r]);
      sign = -sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    }
    prev = a[k][k];
  }
  return sign * a[n - 1][n - 1];
}

template <class T>
T det(const Mat<T>& m) {
  return narrow<T>(det_wide(m));
}

/// Normal to the hyperplane spanned by n-1 vectors in R^n (rows of `rows`),
/// via signed maximal minors. Zero iff the rows are dependent.
template <class T>
Vec<T> cofactor_normal(const Mat<T>& rows, std::size_t n) {
  Vec<T> normal(n, T(0));
  Mat<T> minor(n - 1, Vec<T>(n - 1));
  for (std::size_t col = 0; col < n; ++col) {
    for (std::size_t r = 0; r + 1 < n; ++r) {
      std::size_t c2 = 0;
      for (std::size_t c = 0; c < n; ++c) {
        if (c == col) continue;
        minor[r][c2++] = rows[r][c];
      }
    }
    T d = det(minor);
    normal[col] = (col % 2 == 0) ? d : T(-d);
  }
  return normal;
}

template <class T>
wide_t<T> dot_wide(const Vec<T>& a, const Vec<T>& b) {
  wide_t<T> s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += wide_t<T>(a[i]) * wide_t<T>(b[i]);
  return s;
}

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  return narrow<T>(dot_wide(a, b));
}

template <class T>
Vec<T> sub(const Vec<T>& a, const Vec<T>& b) {
  Vec<T> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline std::int64_t gcd_abs(std::int64_t a, std::int64_t b) { return std::gcd(a < 0 ? -a : a, b < 0 ? -b : b); }

/// Rescales a nonzero normal to a primitive integer vector (same direction).
inline void make_primitive(Vec<std::int64_t>& v) {
  std::int64_t g = 0;
  for (auto c : v) g = gcd_abs(g, c);
  if (g > 1)
    for (auto& c : v) c /= g;
}

inline void make_primitive(Vec<BigRational>& v) {
  BigInt l = 1;
  for (const auto& c : v) l = boost::multiprecision::lcm(l, BigInt(boost::multiprecision::denominator(c)));
  BigInt g = 0;
  for (auto& c : v) {
    c *= l;
    g = boost::multiprecision::gcd(g, BigInt(boost::multiprecision::numerator(c)));
  }
  if (g > 1)
    for (auto& c : v) c /= g;
}

/// Rank by elimination. Integer rows are gcd-reduced to curb growth.
template <class T>
std::size_t rank(Mat<T> a) {
  if (a.empty()) return 0;
  const std::size_t cols = a.front().size();
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < a.size(); ++c) {
    std::size_t p = r;
    while (p < a.size() && a[p][c] == 0) ++p;
    if (p == a.size()) continue;
    std::swap(a[r], a[p]);
    for (std::size_t i = r + 1; i < a.size(); ++i) {
      if (a[i][c] == 0) continue;
      const T f = a[i][c];
      const T piv = a[r][c];
      for (std::size_t j = c; j < cols; ++j) a[i][j] = narrow<T>(wide_t<T>(a[i][j]) * wide_t<T>(piv) - wide_t<T>(a[r][j]) * wide_t<T>(f));
      if constexpr (std::is_same_v<T, std::int64_t>) {
        bool nz = false;
        for (auto x : a[i]) nz = nz || x != 0;
        if (nz) make_primitive(a[i]);
      }
    }
    ++r;
  }
  return r;
}

/// Affine dimension of a point set (-1 for the empty set).
template <class T>
int affine_dim(const std::vector<Vec<T>>& pts) {
  if (pts.empty()) return -1;
  Mat<T> diffs;
  diffs.reserve(pts.size() - 1);
  for (std::size_t i = 1; i < pts.size(); ++i) diffs.push_back(sub(pts[i], pts[0]));
  return static_cast<int>(rank(std::move(diffs)));
}

/// Solves A x = b by Cramer's rule; nullopt when A is singular.
inline std::optional<Vec<BigRational>> solve(const Mat<BigRational>& a, const Vec<BigRational>& b) {
  const std::size_t n = a.size();
  const BigRational d = det(a);
  if (d == 0) return std::nullopt;
  Vec<BigRational> x(n);
  for (std::size_t c = 0; c < n; ++c) {
    Mat<BigRational> m = a;
    for (std::size_t r = 0; r < n; ++r) m[r][c] = b[r];
    x[c] = det(m) / d;
  }
  return x;
}

}  // namespace kstab::linalg
