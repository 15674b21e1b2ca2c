// kstab: K-polystability of toric Fano varieties from the command line.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "kstab/batch.hpp"
#include "kstab/ding.hpp"
#include "kstab/json_io.hpp"

namespace {

using namespace kstab;

constexpr int kExitPolystable = 0;
constexpr int kExitUnstable = 3;
constexpr int kExitUsage = 64;
constexpr int kExitData = 65;
constexpr int kExitNoInput = 66;
constexpr int kExitNumeric = 70;

const char* kExitCodes =
    "Exit codes:\n"
    "  0   success (check: K-polystable)\n"
    "  3   check: K-unstable\n"
    "  64  usage error or invalid flag\n"
    "  65  invalid input data (parse, schema, not reflexive, unsupported dimension)\n"
    "  66  input file cannot be read\n"
    "  70  numerical failure (optimization, tail bound, cross-check, monotonicity, convexity)\n";

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return kExitNoInput;
    case ErrorCode::OptimizationFailed:
    case ErrorCode::TailBoundFailure:
    case ErrorCode::CrossCheckFailed:
    case ErrorCode::MonotonicityViolation: return kExitNumeric;
    default: return kExitData;
  }
}

void print(const Json& j) { std::cout << j.dump(2) << '\n'; }

PLConvexFn load_pl(const std::string& path) { return pl_from_json(parse_json_text(read_text_file(path), path)); }

unsigned default_jobs() {
  const char* env = std::getenv("KSTAB_JOBS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1 || v > 4096) throw CLI::ValidationError("KSTAB_JOBS", "must be a positive integer");
  return static_cast<unsigned>(v);
}

struct Config {
  std::string polytope_path, pl_path, resolution_path, database_path;
  std::string output_path, summary_path, format = "csv";
  bool transpose = false, strict = false;
  unsigned jobs = 1;
  DingParams ding;
};

int run_check(const Config& c) {
  const auto x = from_polytope(polytope_from_text(read_text_file(c.polytope_path), c.polytope_path, c.transpose));
  const auto v = decide_kps(x);
  print(to_json(v));
  return v.status == Stability::KPolystable ? kExitPolystable : kExitUnstable;
}

int run_df(const Config& c) {
  const auto x = from_polytope(polytope_from_text(read_text_file(c.polytope_path), c.polytope_path, c.transpose));
  print(to_json(df_report(x, load_pl(c.pl_path))));
  return 0;
}

int run_ding_slope(const Config& c) {
  const auto x = from_polytope(polytope_from_text(read_text_file(c.polytope_path), c.polytope_path, c.transpose));
  DingParams prm = c.ding;
  prm.jobs = c.jobs;
  const auto rep = slope_limit(x, load_pl(c.pl_path), prm);
  print(to_json(rep));
  for (double r : rep.convexity_residuals) {
    if (r < -prm.eps_conv) {
      std::cerr << "kstab: convexity residual " << r << " below -" << prm.eps_conv << '\n';
      return kExitNumeric;
    }
  }
  return 0;
}

int run_batch(const Config& c) {
  BatchOptions opt;
  opt.jobs = c.jobs;
  opt.format = c.format == "jsonl" ? BatchFormat::JsonLines : BatchFormat::Csv;
  opt.strict = c.strict;
  opt.transpose = c.transpose;

  GzLineSource src(c.database_path);
  std::ofstream file;
  if (!c.output_path.empty()) {
    file.open(c.output_path, std::ios::binary);
    if (!file) throw Error(ErrorCode::IoError, "cannot write " + c.output_path);
  }
  std::ostream& out = c.output_path.empty() ? std::cout : file;
  const auto rep = batch_classify(src, out, opt);

  std::string summary = c.summary_path;
  if (summary.empty() && !c.output_path.empty()) summary = c.output_path + ".summary.json";
  if (summary.empty()) {
    std::cerr << to_json(rep).dump(2) << '\n';
  } else {
    std::ofstream s(summary);
    if (!s) throw Error(ErrorCode::IoError, "cannot write " + summary);
    s << to_json(rep).dump(2) << '\n';
  }
  return 0;
}

int run_q(const Config& c) {
  const auto res = q_eval(resolution_from_json(parse_json_text(read_text_file(c.resolution_path), c.resolution_path)));
  if (res.warning) std::cerr << "kstab: warning: " << *res.warning << '\n';
  std::cout << to_string(res.q) << '\n';
  return 0;
}

void add_tolerances(CLI::App* cmd, DingParams& p) {
  cmd->add_option("--eps-opt", p.eps_opt, "Legendre transform accuracy")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--eps-quad", p.eps_quad, "relative quadrature accuracy")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--slope-tol", p.slope_tol, "accepted distance of the extrapolated slope from its target")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--eps-conv", p.eps_conv, "allowed negative convexity residual")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--fd-step", p.fd_step, "finite-difference step for the derivative cross-check")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--cross-check-tol", p.cross_check_tol, "allowed mismatch between derivative estimates")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--radius-cap", p.radius_cap, "largest admissible truncation radius")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--schedule", p.schedule, "comma-separated increasing times t")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"K-polystability of toric Fano varieties: barycenter test, Donaldson-Futaki invariants, Ding slopes."};
  app.footer(kExitCodes);
  app.require_subcommand(1);
  Config c;
  try {
    c.jobs = default_jobs();
  } catch (const CLI::Error& e) {
    std::cerr << "kstab: " << e.what() << '\n';
    return kExitUsage;
  }

  auto* check = app.add_subcommand("check", "decide K-polystability of the toric Fano variety of a reflexive polytope");
  check->add_option("polytope", c.polytope_path, "polytope JSON or a single PALP block")->required()->check(CLI::ExistingFile);
  check->add_flag("--transpose", c.transpose, "flip the PALP orientation rule");

  auto* dfc = app.add_subcommand("df", "exact Donaldson-Futaki report of a toric test configuration");
  dfc->add_option("polytope", c.polytope_path, "polytope JSON or a single PALP block")->required()->check(CLI::ExistingFile);
  dfc->add_option("function", c.pl_path, "PL convex function JSON")->required()->check(CLI::ExistingFile);
  dfc->add_flag("--transpose", c.transpose, "flip the PALP orientation rule");

  auto* ding = app.add_subcommand("ding-slope", "numerical Ding-functional slope along a toric geodesic ray (dimension <= 2)");
  ding->add_option("polytope", c.polytope_path, "polytope JSON or a single PALP block")->required()->check(CLI::ExistingFile);
  ding->add_option("function", c.pl_path, "PL convex function JSON")->required()->check(CLI::ExistingFile);
  ding->add_flag("--transpose", c.transpose, "flip the PALP orientation rule");
  ding->add_option("-j,--jobs", c.jobs, "worker threads (default: KSTAB_JOBS or 1)")->check(CLI::Range(1u, 4096u));
  add_tolerances(ding, c.ding);

  auto* batch = app.add_subcommand("batch", "classify every polytope of a PALP database (plain or gzip)");
  batch->add_option("database", c.database_path, "PALP file")->required()->check(CLI::ExistingFile);
  batch->add_option("-j,--jobs", c.jobs, "worker threads (default: KSTAB_JOBS or 1)")->check(CLI::Range(1u, 4096u));
  batch->add_option("--format", c.format, "verdict stream format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  batch->add_option("-o,--output", c.output_path, "verdict stream file (default: stdout)");
  batch->add_option("--summary", c.summary_path, "summary JSON file (default: <output>.summary.json, or stderr)");
  batch->add_flag("--strict", c.strict, "abort on the first failing record");
  batch->add_flag("--transpose", c.transpose, "flip the PALP orientation rule");

  auto* q = app.add_subcommand("q", "evaluate the discrepancy term q from resolution data JSON");
  q->add_option("resolution", c.resolution_path, "resolution data JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (*ding) {
    const auto& s = c.ding.schedule;
    bool ok = s.size() >= 2;
    for (std::size_t i = 1; ok && i < s.size(); ++i) ok = s[i] > s[i - 1];
    if (!ok) {
      std::cerr << "kstab: --schedule needs at least two strictly increasing times\n";
      return kExitUsage;
    }
  }

  try {
    if (*check) return run_check(c);
    if (*dfc) return run_df(c);
    if (*ding) return run_ding_slope(c);
    if (*batch) return run_batch(c);
    if (*q) return run_q(c);
  } catch (const Error& e) {
    std::cerr << "kstab: " << e.what();
    if (e.offset()) std::cerr << " (offset " << *e.offset() << ")";
    std::cerr << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "kstab: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
