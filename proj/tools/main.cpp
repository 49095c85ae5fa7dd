#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cstoc/boundary.hpp"
#include "cstoc/io.hpp"
#include "cstoc/solvers.hpp"
#include "cstoc/specfile.hpp"
#include "cstoc/verify.hpp"

namespace fs = std::filesystem;
using namespace cstoc;

namespace {

struct RunConfig {
  std::string spec_path;
  std::string out_dir;  // empty: <output root>/<subcommand>-<config hash>
  int nt = 100;
  int nx = 101;
  int nm = 51;
  double xlo = -4.0, xhi = 4.0;
  double mlo = -1.0, mhi = 2.0;
  double trunc_A = 4.0;
  int u_res = 11;
  int a_res = 20;
  double delta = 0.05;
  long n_paths = 100000;
  std::uint64_t seed = 1;
  double penalty = 0.0;   // 0: automatic
  double margin = -1.0;   // negative: one m-cell
  std::string lateral = "clamp";
  bool serial = false;
  std::size_t max_nodes = 50'000'000;
  std::vector<double> px;              // probe x coordinates (t = 0)
  double pm = 1e300;                   // sentinel: midpoint of the m-axis
  double nu = 1e300;                   // sentinel: midpoint of U
  double alpha = 0.0;
  std::string field_path;              // export input
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

SolverOptions solver_options(const RunConfig& cfg) {
  SolverOptions o;
  if (cfg.lateral == "clamp") {
    o.lateral = LateralBoundary::Clamp;
  } else if (cfg.lateral == "extrapolate") {
    o.lateral = LateralBoundary::Extrapolate;
  } else {
    throw SpecError("--lateral must be clamp or extrapolate");
  }
  o.parallel = !cfg.serial;
  o.mask_margin = cfg.margin;
  o.penalty_level = cfg.penalty;
  o.max_nodes = cfg.max_nodes;
  return o;
}

HamiltonianParams ham_params(const RunConfig& cfg, const ProblemSpec& spec) {
  HamiltonianParams p;
  p.A = cfg.trunc_A;
  p.u_res = cfg.u_res;
  p.a_res = cfg.a_res;
  p.rho = spec.discount;
  return p;
}

Grid plane_grid(const RunConfig& cfg, const ProblemSpec& spec) {
  return Grid::make(TimeGrid(0.0, spec.horizon, cfg.nt), Axis{cfg.xlo, cfg.xhi, cfg.nx});
}

Grid budget_grid(const RunConfig& cfg, const ProblemSpec& spec) {
  return Grid::make(TimeGrid(0.0, spec.horizon, cfg.nt), Axis{cfg.xlo, cfg.xhi, cfg.nx},
                    Axis{cfg.mlo, cfg.mhi, cfg.nm});
}

std::string slurp_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// The numeric configuration, used both for the manifest and for deriving a
/// stable run-directory name. Output paths are deliberately excluded so the
/// same (spec bytes, flags, seed) hash identically wherever they run.
std::vector<std::pair<std::string, std::string>> effective_config(const std::string& sub,
                                                                  const RunConfig& cfg,
                                                                  const std::string& spec_hash) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("subcommand", sub);
  kv.emplace_back("spec", fs::path(cfg.spec_path).filename().string());
  kv.emplace_back("spec_sha256", spec_hash);
  kv.emplace_back("nt", std::to_string(cfg.nt));
  kv.emplace_back("nx", std::to_string(cfg.nx));
  kv.emplace_back("nm", std::to_string(cfg.nm));
  kv.emplace_back("xlo", fmt(cfg.xlo));
  kv.emplace_back("xhi", fmt(cfg.xhi));
  kv.emplace_back("mlo", fmt(cfg.mlo));
  kv.emplace_back("mhi", fmt(cfg.mhi));
  kv.emplace_back("A", fmt(cfg.trunc_A));
  kv.emplace_back("u_res", std::to_string(cfg.u_res));
  kv.emplace_back("a_res", std::to_string(cfg.a_res));
  kv.emplace_back("delta", fmt(cfg.delta));
  kv.emplace_back("n_paths", std::to_string(cfg.n_paths));
  kv.emplace_back("seed", std::to_string(cfg.seed));
  kv.emplace_back("penalty", fmt(cfg.penalty));
  kv.emplace_back("margin", fmt(cfg.margin));
  kv.emplace_back("lateral", cfg.lateral);
  kv.emplace_back("parallel", cfg.serial ? "0" : "1");
  return kv;
}

fs::path run_directory(const std::string& sub, const RunConfig& cfg,
                       const std::vector<std::pair<std::string, std::string>>& kv) {
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    return cfg.out_dir;
  }
  const char* env = std::getenv("CSTOC_OUT");
  const fs::path root = env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
  std::string blob;
  for (const auto& [k, v] : kv) blob += k + "=" + v + "\n";
  const fs::path dir = root / (sub + "-" + sha256_hex(blob).substr(0, 12));
  fs::create_directories(dir);
  return dir;
}

Manifest make_manifest(const std::vector<std::pair<std::string, std::string>>& kv) {
  Manifest man;
  for (const auto& [k, v] : kv) man.set_config(k, v);
  return man;
}

/// Policy table at t = 0 for plotting: one row per (x, m) node.
std::string policy_table(const PolicyField& pol) {
  const Grid& g = pol.grid;
  std::string out = "x1";
  if (g.has_m()) out += ",m";
  for (int i = 0; i < pol.u_dim; ++i) out += ",u" + std::to_string(i + 1);
  for (int i = 0; i < pol.a_dim; ++i) out += ",a" + std::to_string(i + 1);
  out += ",defined\n";
  for (int ix = 0; ix < g.nx(); ++ix) {
    for (int im = 0; im < g.nm(); ++im) {
      out += fmt(g.x.at(ix));
      if (g.has_m()) out += "," + fmt(g.m->at(im));
      for (double u : pol.u_at(0, ix, im)) out += "," + fmt(u);
      for (double a : pol.a_at(0, ix, im)) out += "," + fmt(a);
      out += pol.defined[pol.node(0, ix, im)] ? ",1\n" : ",0\n";
    }
  }
  return out;
}

/// Value slice at t = 0 (for budget fields: the value along m at each x).
std::string slice_table(const ValueField& field) {
  const Grid& g = field.grid;
  std::string out = g.has_m() ? "x1,m,value,masked\n" : "x1,value,masked\n";
  for (int ix = 0; ix < g.nx(); ++ix) {
    for (int im = 0; im < g.nm(); ++im) {
      out += fmt(g.x.at(ix));
      if (g.has_m()) out += "," + fmt(g.m->at(im));
      out += "," + fmt(field.at(0, ix, im));
      out += field.is_masked(0, ix, im) ? ",1\n" : ",0\n";
    }
  }
  return out;
}

int finish_reports(Manifest& man, const fs::path& dir,
                   const std::vector<VerificationReport>& reports) {
  std::string arr = "[\n";
  std::string csv = "name,verdict,estimate,se,slack\n";
  bool any_fail = false;
  std::printf("%-28s %-13s %12s %12s %12s\n", "check", "verdict", "estimate", "se", "slack");
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const VerificationReport& r = reports[i];
    std::string one = r.to_text();
    while (!one.empty() && one.back() == '\n') one.pop_back();
    arr += one;
    arr += i + 1 < reports.size() ? ",\n" : "\n";
    csv += r.name + "," + std::string(verdict_name(r.verdict)) + "," + fmt(r.estimate) + "," +
           fmt(r.se) + "," + fmt(r.slack) + "\n";
    any_fail = any_fail || r.verdict == Verdict::Fail;
    std::printf("%-28s %-13s %12.5g %12.5g %12.5g\n", r.name.c_str(),
                std::string(verdict_name(r.verdict)).c_str(), r.estimate, r.se, r.slack);
  }
  arr += "]\n";
  man.add_artifact(dir, "reports.json", arr);
  man.add_artifact(dir, "summary.csv", csv);
  man.write(dir);
  std::printf("wrote %s\n", dir.string().c_str());
  return any_fail ? 1 : 0;
}

double probe_m(const RunConfig& cfg) {
  return cfg.pm < 1e299 ? cfg.pm : 0.5 * (cfg.mlo + cfg.mhi);
}

std::vector<double> probe_xs(const RunConfig& cfg) {
  if (!cfg.px.empty()) return cfg.px;
  return {0.5 * (cfg.xlo + cfg.xhi)};
}

std::vector<double> default_nu(const RunConfig& cfg, const ProblemSpec& spec) {
  std::vector<double> u(static_cast<std::size_t>(spec.control_dim()));
  for (int i = 0; i < spec.control_dim(); ++i) {
    u[i] = cfg.nu < 1e299 ? cfg.nu : 0.5 * (spec.controls.lo[i] + spec.controls.hi[i]);
  }
  return u;
}

int run_solve(const std::string& sub, const RunConfig& cfg) {
  const std::string spec_bytes = slurp_file(cfg.spec_path);
  const ProblemSpec spec = parse_problem_text(spec_bytes, cfg.spec_path);
  const auto kv = effective_config(sub, cfg, sha256_hex(spec_bytes));
  const fs::path dir = run_directory(sub, cfg, kv);
  Manifest man = make_manifest(kv);
  const SolverOptions opts = solver_options(cfg);
  const HamiltonianParams hp = ham_params(cfg, spec);

  if (sub == "solve-floor") {
    const ValueField field = solve_constraint_floor(spec, plane_grid(cfg, spec), hp, opts);
    man.add_artifact(dir, "field.csv", field_to_csv(field));
    man.add_artifact(dir, "field.bin", field_to_binary(field));
    man.add_artifact(dir, "slice_t0.csv", slice_table(field));
  } else if (sub == "solve-state") {
    const SolveResult sol = solve_state_constrained(spec, plane_grid(cfg, spec), hp, opts);
    man.add_artifact(dir, "field.csv", field_to_csv(sol.value, &sol.policy));
    man.add_artifact(dir, "field.bin", field_to_binary(sol.value));
    man.add_artifact(dir, "slice_t0.csv", slice_table(sol.value));
    man.add_artifact(dir, "policy_t0.csv", policy_table(sol.policy));
  } else {
    const SolveResult sol = solve_expectation_constrained(spec, budget_grid(cfg, spec), hp, opts);
    man.add_artifact(dir, "field.csv", field_to_csv(sol.value, &sol.policy));
    man.add_artifact(dir, "field.bin", field_to_binary(sol.value));
    man.add_artifact(dir, "slice_t0.csv", slice_table(sol.value));
    man.add_artifact(dir, "policy_t0.csv", policy_table(sol.policy));
  }
  man.write(dir);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

int run_verify_dpp(const RunConfig& cfg) {
  const std::string spec_bytes = slurp_file(cfg.spec_path);
  const ProblemSpec spec = parse_problem_text(spec_bytes, cfg.spec_path);
  const auto kv = effective_config("verify-dpp", cfg, sha256_hex(spec_bytes));
  const fs::path dir = run_directory("verify-dpp", cfg, kv);
  Manifest man = make_manifest(kv);

  TestFixture fx;
  fx.spec = spec;
  fx.value =
      solve_expectation_constrained(spec, budget_grid(cfg, spec), ham_params(cfg, spec),
                                    solver_options(cfg))
          .value;

  VerifyOptions vo;
  vo.n_paths = cfg.n_paths;
  vo.seed = cfg.seed;
  vo.parallel = !cfg.serial;

  const ControlProgram nu = ControlProgram::constant(default_nu(cfg, spec), spec.controls);
  const MartingaleProgram alpha =
      MartingaleProgram::constant({cfg.alpha}, std::max(cfg.trunc_A, std::abs(cfg.alpha)));
  const double m0 = probe_m(cfg);
  const double half = 0.5 * spec.horizon;

  std::vector<VerificationReport> reports;
  for (double x : probe_xs(cfg)) {
    const ProbePoint pt = ProbePoint::budget(0.0, x, m0);
    reports.push_back(check_dpp_upper(fx, pt, nu, alpha, TauRule::terminal(), vo));
    reports.push_back(check_dpp_upper(fx, pt, nu, alpha, TauRule::fixed_time(half), vo));
    reports.push_back(check_dpp_lower(fx, pt, cfg.delta, nu, alpha, TauRule::terminal(), vo));
    reports.push_back(check_dpp_lower(fx, pt, cfg.delta, nu, alpha, TauRule::fixed_time(half), vo));
    reports.push_back(check_dpp_lower(fx, pt, cfg.delta, nu, alpha, TauRule::immediate(), vo));
  }
  return finish_reports(man, dir, reports);
}

int run_verify_rc(const RunConfig& cfg) {
  const std::string spec_bytes = slurp_file(cfg.spec_path);
  const ProblemSpec spec = parse_problem_text(spec_bytes, cfg.spec_path);
  const auto kv = effective_config("verify-rc", cfg, sha256_hex(spec_bytes));
  const fs::path dir = run_directory("verify-rc", cfg, kv);
  Manifest man = make_manifest(kv);

  TestFixture fx;
  fx.spec = spec;
  fx.value =
      solve_expectation_constrained(spec, budget_grid(cfg, spec), ham_params(cfg, spec),
                                    solver_options(cfg))
          .value;

  VerifyOptions vo;
  vo.n_paths = cfg.n_paths;
  vo.seed = cfg.seed;
  vo.parallel = !cfg.serial;

  std::vector<double> xs = cfg.px;
  if (xs.empty()) {
    for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) xs.push_back(cfg.xlo + q * (cfg.xhi - cfg.xlo));
  }
  const double m0 = probe_m(cfg);
  std::vector<VerificationReport> reports;
  for (double x : xs) {
    reports.push_back(check_right_continuity(fx, ProbePoint::budget(0.0, x, m0), {}, vo));
  }
  return finish_reports(man, dir, reports);
}

int run_verify_open_closed(const RunConfig& cfg) {
  const std::string spec_bytes = slurp_file(cfg.spec_path);
  const ProblemSpec spec = parse_problem_text(spec_bytes, cfg.spec_path);
  const auto kv = effective_config("verify-open-closed", cfg, sha256_hex(spec_bytes));
  const fs::path dir = run_directory("verify-open-closed", cfg, kv);
  Manifest man = make_manifest(kv);

  TestFixture fx;
  fx.spec = spec;
  fx.state_value = solve_state_constrained(spec, plane_grid(cfg, spec), ham_params(cfg, spec),
                                           solver_options(cfg))
                       .value;
  // Candidate closed-loop programs: the corners and midpoint of U.
  for (double q : {0.0, 0.5, 1.0}) {
    std::vector<double> u(static_cast<std::size_t>(spec.control_dim()));
    for (int i = 0; i < spec.control_dim(); ++i) {
      u[i] = spec.controls.lo[i] + q * (spec.controls.hi[i] - spec.controls.lo[i]);
    }
    fx.controls.push_back(ControlProgram::constant(u, spec.controls));
  }
  for (double x : probe_xs(cfg)) fx.probes.push_back(ProbePoint::state(0.0, x));

  VerifyOptions vo;
  vo.n_paths = cfg.n_paths;
  vo.seed = cfg.seed;
  vo.parallel = !cfg.serial;

  std::vector<VerificationReport> reports;
  if (spec.has_domain() && !spec.feedback_check.empty()) {
    BoundaryOptions bo;
    bo.seed = cfg.seed;
    bo.parallel = !cfg.serial;
    reports.push_back(check_class_R_sufficient(spec, bo));
    vo.class_r_ok = reports.back().verdict == Verdict::Pass;
  }
  reports.push_back(check_open_closed(fx, vo));
  return finish_reports(man, dir, reports);
}

int run_audit_boundary(const RunConfig& cfg) {
  const std::string spec_bytes = slurp_file(cfg.spec_path);
  const ProblemSpec spec = parse_problem_text(spec_bytes, cfg.spec_path);
  const auto kv = effective_config("audit-boundary", cfg, sha256_hex(spec_bytes));
  const fs::path dir = run_directory("audit-boundary", cfg, kv);
  Manifest man = make_manifest(kv);

  BoundaryOptions bo;
  bo.n_paths = cfg.n_paths;
  bo.seed = cfg.seed;
  bo.parallel = !cfg.serial;

  std::vector<VerificationReport> reports;
  if (!spec.has_domain() || !spec.feedback_hat.empty()) {
    std::vector<std::vector<double>> starts;
    for (double x : probe_xs(cfg)) starts.push_back({x});
    reports.push_back(check_feedback_invariance(spec, starts, bo));
  } else {
    std::printf("skipping invariance check: no invariant feedback law declared\n");
  }
  if (spec.has_domain() && !spec.feedback_check.empty()) {
    reports.push_back(check_class_R_sufficient(spec, bo));
  } else {
    std::printf("skipping boundary drift audit: no inward feedback law declared\n");
  }
  reports.push_back(check_hamiltonian_regularity(spec, bo));
  return finish_reports(man, dir, reports);
}

int run_export(const RunConfig& cfg) {
  const std::string bytes = slurp_file(cfg.field_path);
  const ValueField field = field_from_binary(bytes);
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("subcommand", "export");
  kv.emplace_back("field", fs::path(cfg.field_path).filename().string());
  kv.emplace_back("field_sha256", sha256_hex(bytes));
  const fs::path dir = run_directory("export", cfg, kv);
  Manifest man = make_manifest(kv);
  man.add_artifact(dir, "field.csv", field_to_csv(field));
  man.add_artifact(dir, "slice_t0.csv", slice_table(field));
  man.write(dir);
  std::printf("wrote %s\n", dir.string().c_str());
  return 0;
}

void add_common_options(CLI::App* cmd, RunConfig& cfg, bool needs_spec) {
  if (needs_spec) cmd->add_option("--spec", cfg.spec_path, "problem file")->required();
  cmd->add_option("--out", cfg.out_dir, "run directory (default: derived under $CSTOC_OUT)");
  cmd->add_option("--nt", cfg.nt, "time steps");
  cmd->add_option("--nx", cfg.nx, "state nodes");
  cmd->add_option("--nm", cfg.nm, "budget nodes");
  cmd->add_option("--xlo", cfg.xlo, "state axis lower end");
  cmd->add_option("--xhi", cfg.xhi, "state axis upper end");
  cmd->add_option("--mlo", cfg.mlo, "budget axis lower end");
  cmd->add_option("--mhi", cfg.mhi, "budget axis upper end");
  cmd->add_option("--A", cfg.trunc_A, "martingale truncation radius");
  cmd->add_option("--u-res", cfg.u_res, "control grid points per axis");
  cmd->add_option("--a-res", cfg.a_res, "aligned slope resolution");
  cmd->add_option("--delta", cfg.delta, "budget relaxation for the lower check");
  cmd->add_option("--n-paths", cfg.n_paths, "Monte Carlo sample paths");
  cmd->add_option("--seed", cfg.seed, "random seed");
  cmd->add_option("--penalty", cfg.penalty, "infeasible terminal penalty (0 = auto)");
  cmd->add_option("--margin", cfg.margin, "mask margin (negative = one m-cell)");
  cmd->add_option("--lateral", cfg.lateral, "lateral ghost rule: clamp|extrapolate");
  cmd->add_flag("--serial", cfg.serial, "disable the parallel kernels");
  cmd->add_option("--max-nodes", cfg.max_nodes, "refuse lattices above this node count");
  cmd->add_option("--px", cfg.px, "probe x coordinates (repeatable)");
  cmd->add_option("--pm", cfg.pm, "probe budget level");
  cmd->add_option("--nu", cfg.nu, "constant control for the DPP plans");
  cmd->add_option("--alpha", cfg.alpha, "constant martingale loading for the DPP plans");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constrained stochastic control: grid solvers and Monte Carlo verification"};
  app.require_subcommand(1);
  RunConfig cfg;
  int rc = 0;

  for (const char* sub : {"solve-floor", "solve-constrained", "solve-state"}) {
    CLI::App* cmd = app.add_subcommand(sub, "solve and export a value field");
    add_common_options(cmd, cfg, true);
    const std::string name = sub;
    cmd->callback([&cfg, &rc, name] { rc = run_solve(name, cfg); });
  }
  {
    CLI::App* cmd = app.add_subcommand("verify-dpp", "Monte Carlo check of both value bounds");
    add_common_options(cmd, cfg, true);
    cmd->callback([&cfg, &rc] { rc = run_verify_dpp(cfg); });
  }
  {
    CLI::App* cmd =
        app.add_subcommand("verify-rc", "budget relaxation gap sweep at the probe points");
    add_common_options(cmd, cfg, true);
    cmd->callback([&cfg, &rc] { rc = run_verify_rc(cfg); });
  }
  {
    CLI::App* cmd = app.add_subcommand("verify-open-closed",
                                       "open-domain grid value vs closed-loop simulation");
    add_common_options(cmd, cfg, true);
    cmd->callback([&cfg, &rc] { rc = run_verify_open_closed(cfg); });
  }
  {
    CLI::App* cmd = app.add_subcommand("audit-boundary", "domain-geometry hypothesis checks");
    add_common_options(cmd, cfg, true);
    cmd->callback([&cfg, &rc] { rc = run_audit_boundary(cfg); });
  }
  {
    CLI::App* cmd = app.add_subcommand("export", "re-emit a stored binary field as CSV");
    cmd->add_option("--field", cfg.field_path, "binary field image")->required();
    cmd->add_option("--out", cfg.out_dir, "run directory");
    cmd->callback([&cfg, &rc] { rc = run_export(cfg); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const SpecFileError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}
