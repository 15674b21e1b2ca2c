#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/gmp.hpp>

#include "kstab/errors.hpp"

namespace kstab {

using BigInt = boost::multiprecision::mpz_int;
using BigRational = boost::multiprecision::mpq_rational;

using IntPoint = std::vector<std::int64_t>;
using RatPoint = std::vector<BigRational>;

/// "p/q" in lowest terms, or "p" when the denominator is 1.
inline std::string to_string(const BigRational& q) {
  const BigInt num = boost::multiprecision::numerator(q);
  const BigInt den = boost::multiprecision::denominator(q);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

inline BigRational parse_rational(std::string_view text) {
  auto parse_int = [&](std::string_view s) {
    if (s.empty()) throw Error(ErrorCode::SchemaViolation, "empty rational component in '" + std::string(text) + "'");
    std::size_t i = (s.front() == '-' || s.front() == '+') ? 1 : 0;
    if (i == s.size()) throw Error(ErrorCode::SchemaViolation, "bad rational '" + std::string(text) + "'");
    for (std::size_t j = i; j < s.size(); ++j) {
      if (s[j] < '0' || s[j] > '9') throw Error(ErrorCode::SchemaViolation, "bad rational '" + std::string(text) + "'");
    }
    return BigInt(std::string(s.front() == '+' ? s.substr(1) : s));
  };
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return BigRational(parse_int(text));
  BigInt num = parse_int(text.substr(0, slash));
  BigInt den = parse_int(text.substr(slash + 1));
  if (den == 0) throw Error(ErrorCode::SchemaViolation, "zero denominator in '" + std::string(text) + "'");
  return BigRational(num, den);
}

inline double to_double(const BigRational& q) { return q.convert_to<double>(); }

inline BigInt to_bigint(__int128 v) {
  const bool neg = v < 0;
  unsigned __int128 u = neg ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
  BigInt hi(static_cast<std::uint64_t>(u >> 64));
  BigInt lo(static_cast<std::uint64_t>(u));
  BigInt r = (hi << 64) + lo;
  return neg ? BigInt(-r) : r;
}

inline RatPoint to_rational(const IntPoint& p) {
  RatPoint r;
  r.reserve(p.size());
  for (auto c : p) r.emplace_back(c);
  return r;
}

inline std::vector<double> to_double(const RatPoint& p) {
  std::vector<double> r;
  r.reserve(p.size());
  for (const auto& c : p) r.push_back(to_double(c));
  return r;
}

inline bool is_integer(const BigRational& q) { return boost::multiprecision::denominator(q) == 1; }

}  // namespace kstab
