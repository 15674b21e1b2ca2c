#pragma once

// JSON forms of the library types. Rationals are written as "p/q" strings
// (or "p" for integers) and read from either strings or JSON integers.
//
//   polytope:   {"dim": 2, "vertices": [[2,-1],[-1,2],[-1,-1]]}
//   PL fn:      {"pieces": [{"a": ["1", "0"], "c": "-1/2"}, ...]}
//   resolution: {"l_n": "1", "components": [{"m": 2, "c": "1/2", "lprime_n_dot_E": "0"}]}

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "kstab/batch.hpp"
#include "kstab/ding.hpp"
#include "kstab/palp.hpp"
#include "kstab/test_configuration.hpp"
#include "kstab/toric_fano.hpp"

namespace kstab {

using Json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void schema_error(const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); }

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) schema_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

inline BigRational rational_from_json(const Json& j) {
  if (j.is_number_integer()) return BigRational(j.get<std::int64_t>());
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const std::exception&) {
      schema_error("'" + j.get<std::string>() + "' is not a rational");
    }
  }
  schema_error("expected a rational as string or integer, got " + j.dump());
}

inline Json rational_array(const RatPoint& p) {
  Json a = Json::array();
  for (const auto& c : p) a.push_back(to_string(c));
  return a;
}

}  // namespace detail

inline LatticePolytope polytope_from_json(const Json& j) {
  const auto& verts = detail::require(j, "vertices");
  if (!verts.is_array()) detail::schema_error("'vertices' must be an array");
  std::vector<IntPoint> pts;
  for (const auto& v : verts) {
    if (!v.is_array()) detail::schema_error("vertex must be an array of integers");
    IntPoint p;
    for (const auto& c : v) {
      if (!c.is_number_integer()) detail::schema_error("vertex coordinate " + c.dump() + " is not an integer");
      p.push_back(c.get<std::int64_t>());
    }
    pts.push_back(std::move(p));
  }
  if (j.contains("dim")) {
    const auto dim = j.at("dim");
    if (!dim.is_number_unsigned()) detail::schema_error("'dim' must be a positive integer");
    for (const auto& p : pts)
      if (p.size() != dim.get<std::size_t>()) detail::schema_error("vertex length differs from 'dim'");
  }
  return make_polytope(std::move(pts));
}

inline Json to_json(const LatticePolytope& p) {
  Json v = Json::array();
  for (const auto& x : p.vertices()) v.push_back(x);
  return Json{{"dim", p.dim()}, {"vertices", v}};
}

inline PLConvexFn pl_from_json(const Json& j) {
  const auto& pieces = detail::require(j, "pieces");
  if (!pieces.is_array() || pieces.empty()) detail::schema_error("'pieces' must be a non-empty array");
  std::vector<AffineFn> out;
  for (const auto& p : pieces) {
    AffineFn a;
    const auto& grad = detail::require(p, "a");
    if (!grad.is_array()) detail::schema_error("'a' must be an array");
    for (const auto& c : grad) a.gradient.push_back(detail::rational_from_json(c));
    a.constant = p.contains("c") ? detail::rational_from_json(p.at("c")) : BigRational(0);
    out.push_back(std::move(a));
  }
  return PLConvexFn(std::move(out));
}

inline Json to_json(const AffineFn& a) { return Json{{"a", detail::rational_array(a.gradient)}, {"c", to_string(a.constant)}}; }

inline Json to_json(const PLConvexFn& f) {
  Json pieces = Json::array();
  for (const auto& p : f.pieces()) pieces.push_back(to_json(p));
  return Json{{"pieces", pieces}};
}

inline ResolutionData resolution_from_json(const Json& j) {
  ResolutionData d;
  d.l_n = detail::rational_from_json(detail::require(j, "l_n"));
  const auto& comps = detail::require(j, "components");
  if (!comps.is_array()) detail::schema_error("'components' must be an array");
  for (const auto& c : comps) {
    ResolutionComponent e;
    const auto& m = detail::require(c, "m");
    if (!m.is_number_integer()) detail::schema_error("'m' must be an integer");
    e.m = m.get<std::int64_t>();
    e.c = detail::rational_from_json(detail::require(c, "c"));
    e.lprime_n_dot_e = detail::rational_from_json(detail::require(c, "lprime_n_dot_E"));
    d.components.push_back(e);
  }
  return d;
}

inline Json to_json(const StabilityVerdict& v) {
  return Json{{"status", to_string(v.status)},
              {"barycenter", detail::rational_array(v.barycenter)},
              {"degree", to_string(v.degree)},
              {"witness", v.witness ? to_json(*v.witness) : Json(nullptr)}};
}

inline Json to_json(const DFReport& r) {
  return Json{{"df", to_string(r.df)},
              {"ding", to_string(r.ding)},
              {"q_hat", to_string(r.q_hat)},
              {"linfty", to_string(r.linfty)},
              {"linfty_raw", to_string(r.linfty_raw)},
              {"normalized_df", r.normalized_df ? Json(to_string(*r.normalized_df)) : Json(nullptr)},
              {"is_product", r.is_product}};
}

inline Json to_json(const DingParams& p) {
  return Json{{"eps_opt", p.eps_opt},         {"eps_quad", p.eps_quad},   {"slope_tol", p.slope_tol},
              {"eps_conv", p.eps_conv},       {"fd_step", p.fd_step},     {"cross_check_tol", p.cross_check_tol},
              {"radius_cap", p.radius_cap},   {"schedule", p.schedule},   {"jobs", p.jobs}};
}

inline Json to_json(const SlopeReport& r) {
  Json samples = Json::array();
  for (const auto& s : r.samples) {
    samples.push_back(Json{{"t", s.t},
                           {"v", s.v},
                           {"v_deriv", s.v_deriv},
                           {"v_deriv_fd", s.v_deriv_fd},
                           {"ding_slope", s.ding_slope},
                           {"radius", s.radius},
                           {"tail_bound", s.tail_bound},
                           {"rel_error", s.rel_error},
                           {"intervals", s.intervals},
                           {"evaluations", s.evaluations}});
  }
  return Json{{"t_samples", r.t_samples()},
              {"v_values", r.v_values()},
              {"v_derivs", r.v_derivs()},
              {"ding_slopes", r.ding_slopes()},
              {"energy_slope", to_string(r.energy_slope)},
              {"extrapolated_limit", r.extrapolated_limit},
              {"convexity_residuals", r.convexity_residuals},
              {"target_minus_df", to_string(r.target_minus_df)},
              {"q_hat_numeric", r.q_hat_numeric},
              {"samples", samples},
              {"params", to_json(r.params)}};
}

inline Json to_json(const BatchReport& r) {
  Json failures = Json::array();
  for (const auto& f : r.failures)
    failures.push_back(Json{{"index", f.index}, {"line", f.line}, {"code", to_string(f.code)}, {"message", f.message}});
  return Json{{"total", r.total},
              {"reflexive_count", r.reflexive_count},
              {"polystable_count", r.polystable_count},
              {"unstable_count", r.unstable_count},
              {"failures", failures}};
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, origin + ": " + e.what(), e.byte);
  }
}

/// Polytope from JSON text or from a single PALP block.
inline LatticePolytope polytope_from_text(const std::string& text, const std::string& origin = "input",
                                          bool transpose = false) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw Error(ErrorCode::EmptyInput, origin + " is empty");
  if (text[first] == '{') return polytope_from_json(parse_json_text(text, origin));
  std::istringstream in(text);
  StreamLineSource src(in);
  PalpReader reader(src);
  auto rec = reader.next();
  if (!rec) throw Error(ErrorCode::EmptyInput, origin + " has no PALP block");
  auto p = rec->polytope(transpose);
  std::string rest;
  while (src.getline(rest))
    if (rest.find_first_not_of(" \t\r") != std::string::npos)
      throw Error(ErrorCode::SchemaViolation, origin + " holds more than one PALP block");
  return p;
}

}  // namespace kstab
