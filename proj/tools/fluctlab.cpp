// Command-line experiment driver. Every subcommand reads a flat INI config,
// writes CSV artifacts plus manifest.ini into the output directory, and
// exits nonzero when an invariant check fails.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <omp.h>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>

#include "fluctlab/dynamics.hpp"
#include "fluctlab/error.hpp"
#include "fluctlab/experiments.hpp"
#include "fluctlab/functionals.hpp"
#include "fluctlab/io.hpp"
#include "fluctlab/kernels.hpp"
#include "fluctlab/observables.hpp"
#include "fluctlab/pde.hpp"
#include "fluctlab/selftest.hpp"
#include "fluctlab/variational.hpp"

namespace fs = std::filesystem;
using namespace fluctlab;

namespace {

constexpr int kInvariantViolation = 2;
constexpr int kCheckFailed = 3;

Point point_from(const std::vector<double>& v) {
  Point p{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < std::min<std::size_t>(3, v.size()); ++i) p[i] = v[i];
  return p;
}

double step_for(const ExperimentConfig& e, const TorusGrid& g) { return e.dt > 0 ? e.dt : 0.5 * cfl_limit(g); }

// Stored path if path.densities/path.currents are given, otherwise the driven
// parabolic solution from the configured profile and field.
PathDiscretization path_from(Config& cfg, const ExperimentConfig& e, const TransportCoefficients& coeffs) {
  const std::string dens = cfg.get_string("path.densities", "");
  const std::string curr = cfg.get_string("path.currents", "");
  if (!dens.empty() || !curr.empty()) {
    if (dens.empty() || curr.empty()) throw InvalidArgument("path.densities and path.currents must be given together");
    return read_path(dens, curr);
  }
  const TorusGrid g(e.d, e.M);
  const ScalarField gamma = ScalarField::sample(g, e.profile.function());
  return solve_driven_parabolic(gamma, e.field.build(e.d), coeffs, e.T, step_for(e, g));
}

int cmd_simulate(Config& cfg, const ExperimentConfig& e) {
  const bool events = cfg.get_bool("simulate.events", true);
  const TorusGrid lattice(e.d, e.N);
  SimulationOptions so;
  so.record_events = events;
  Trajectory tr;
  LatticeState init;
  if (e.model == Model::kmp) {
    init = random_state(lattice, StateKind::energy, e.profile.function(), derive_seed(e.seed, 0));
    tr = simulate_kmp(init, e.T, derive_seed(e.seed, 1), so);
  } else {
    init = random_state(lattice, StateKind::exclusion, e.profile.function(), derive_seed(e.seed, 0));
    tr = simulate_exclusion(init, e.T, e.field.build(e.d), derive_seed(e.seed, 1), so);
  }
  write_scalar_field(e.out / "final_density.csv", empirical_density(tr.final_state));
  if (events) write_event_log(e.out / "events.csv", tr.ledger);
  {
    CsvWriter csv(e.out / "bond_currents.csv", {"x", "j", "net", "forward", "backward"});
    for (std::size_t x = 0; x < lattice.size(); ++x)
      for (int j = 0; j < e.d; ++j) {
        const auto b = tr.ledger.bond(x, j);
        csv.row(x, j, tr.ledger.net[b], tr.ledger.forward[b], tr.ledger.backward[b]);
      }
  }
  const double defect = tr.ledger.conservation_defect(tr.final_state);
  const double drift = std::fabs(tr.final_state.total() - init.total());
  const double mismatch = tr.ledger.gross_net_mismatch();
  {
    CsvWriter csv(e.out / "simulate_summary.csv",
                  {"initial_total", "final_total", "conservation_defect", "gross_net_mismatch", "events"});
    csv.row(init.total(), tr.final_state.total(), defect, mismatch, tr.ledger.events.size());
  }
  fmt::print("conserved quantity {} -> {}, conservation defect {:.3e}\n", init.total(), tr.final_state.total(), defect);
  const double tol = e.model == Model::kmp ? 1e-9 * std::max(1.0, init.total()) : 0.0;
  return (defect <= tol && drift <= tol && mismatch <= tol) ? 0 : kInvariantViolation;
}

int cmd_lln(Config& cfg, const ExperimentConfig& e, bool driven) {
  LlnOptions o;
  o.N = e.N;
  o.T = e.T;
  o.profile = e.profile;
  o.field = driven ? e.field.build(e.d) : DriftField::zero(e.d);
  if (driven && o.field.is_zero()) throw InvalidArgument("wasep-check needs a nonzero field: set [run] model = wasep or a [field] section");
  o.replicas = cfg.get_int("lln.replicas", 20);
  o.tests = static_cast<std::size_t>(cfg.get_int("lln.tests", 10));
  o.pde_M = e.M;
  o.seed = e.seed;
  const double tol = cfg.get_double("lln.tolerance", 0.02);
  const LlnReport rep = run_lln(o);
  CsvWriter csv(e.out / (driven ? "wasep.csv" : "lln.csv"),
                {"test", "label", "density_micro", "density_pde", "density_error", "current_micro", "current_pde",
                 "current_error"},
                {fmt::format("N={} T={:.17g} replicas={}", o.N, o.T, o.replicas)});
  for (const auto& r : rep.rows)
    csv.row(r.test, r.label, r.density_micro, r.density_pde, r.density_error(), r.current_micro, r.current_pde,
            r.current_error());
  fmt::print("max density error {:.4e}, max current error {:.4e} (tolerance {})\n", rep.max_density_error,
             rep.max_current_error, tol);
  if (rep.max_conservation_defect != 0.0) return kInvariantViolation;
  return rep.max_density_error <= tol && rep.max_current_error <= tol ? 0 : kCheckFailed;
}

int cmd_rate_eval(Config& cfg, const ExperimentConfig& e) {
  const auto coeffs = e.coefficients();
  const PathDiscretization path = path_from(cfg, e, coeffs);
  RateOptions ro;
  ro.E = point_from(cfg.get_doubles("rate.E", {0.0}));
  ro.chi_floor = cfg.get_double("rate.chi_floor", 1e-10);
  if (cfg.get_bool("rate.write_path", true))
    write_path(e.out / "path_densities.csv", e.out / "path_currents.csv", path);
  const RateEvalReport rep = eval_I(path, coeffs, ro);
  CsvWriter csv(e.out / "rate.csv",
                {"value", "clamps", "validated", "continuity_residual", "continuity_tolerance", "mass_drift", "steps"});
  csv.row(rep.value, rep.clamps, rep.validated(), rep.continuity_residual, rep.continuity_tolerance, rep.mass_drift,
          rep.G.size());
  fmt::print("{}", rep.to_text());
  return 0;
}

int cmd_density_rate(Config& cfg, const ExperimentConfig& e) {
  const auto coeffs = e.coefficients();
  PathDiscretization path = path_from(cfg, e, coeffs);
  const DensityRateResult dr = eval_density_rate(path, coeffs);
  const double given = eval_I(path, coeffs).value;
  PathDiscretization grad = path;
  grad.currents = dr.gradient_currents(path, coeffs);
  const double gradient_form = eval_I(grad, coeffs).value;
  CsvWriter csv(e.out / "density_rate.csv",
                {"density_rate", "I_given_current", "I_gradient_form", "max_elliptic_residual", "clamps"});
  csv.row(dr.value, given, gradient_form, dr.max_elliptic_residual, dr.clamps);
  fmt::print("density rate {:.10g}, I(given) {:.10g}, I(gradient form) {:.10g}\n", dr.value, given, gradient_form);
  // The infimum over compatible currents cannot exceed any particular one.
  return dr.value <= given + 1e-9 * std::max(1.0, given) ? 0 : kInvariantViolation;
}

ProfileOptions profile_options(Config& cfg, int resolution) {
  ProfileOptions o;
  o.resolution = resolution;
  o.max_iterations = cfg.get_int("optimizer.max_iterations", o.max_iterations);
  o.tolerance = cfg.get_double("optimizer.tolerance", o.tolerance);
  o.margin = cfg.get_double("optimizer.margin", o.margin);
  o.cosine_starts = cfg.get_int("optimizer.cosine_starts", o.cosine_starts);
  o.seed = cfg.get_u64("optimizer.seed", o.seed);
  return o;
}

int cmd_umin(Config& cfg, const ExperimentConfig& e) {
  const auto coeffs = e.coefficients();
  const double m = cfg.get_double("umin.m", 0.5);
  const Point j = point_from(cfg.get_doubles("umin.j", {1.0}));
  const TorusGrid g(e.d, e.M);
  const auto r = minimize_Um(VectorField::constant(g, j), m, coeffs, profile_options(cfg, e.M));
  double closed = std::nan("");
  if (e.d == 1 && coeffs.inverse_mobility_convex()) closed = closed_form_Um_1d(j[0], m, coeffs);
  CsvWriter csv(e.out / "umin.csv", {"value", "closed_form", "iterations", "converged", "gradient_norm",
                                     "start_index", "clamps"});
  csv.row(r.value, closed, r.iterations, r.converged, r.gradient_norm, r.start_index, r.clamps);
  write_scalar_field(e.out / "umin_profile.csv", r.rho);
  fmt::print("U_m = {:.12g} (closed form {:.12g}), converged {}\n", r.value, closed, r.converged);
  return 0;
}

int cmd_psi_scan(Config& cfg, const ExperimentConfig& e) {
  const auto coeffs = e.coefficients();
  const double m = cfg.get_double("psi.m", 1.0);
  const double J = cfg.get_double("psi.J", 10.0);
  const double v0 = cfg.get_double("psi.v_min", 0.0);
  const double v1 = cfg.get_double("psi.v_max", 40.0);
  const int n = cfg.get_int("psi.v_count", 21);
  const ProfileOptions po = profile_options(cfg, e.M);
  require(n >= 2, "psi.v_count must be at least 2");
  const TorusGrid g(1, e.M);
  ProfileOptions serial = po;
  serial.parallel = false;
  const double U = minimize_Um(VectorField::constant(g, {J, 0, 0}), m, coeffs, serial).value;
  CsvWriter csv(e.out / "psi_scan.csv", {"v", "psi", "U", "iterations", "converged", "clamps"},
                {fmt::format("J={:.17g} m={:.17g}", J, m)});
  // Independent points; evaluated in parallel, written in order.
  const auto rows = kernels::map_replicas_omp(static_cast<std::size_t>(n), [&](std::size_t i) {
    const double v = v0 + (v1 - v0) * static_cast<double>(i) / (n - 1);
    return std::make_pair(v, eval_Psi_v(J, v, m, coeffs, serial));
  });
  for (const auto& [v, r] : rows) csv.row(v, r.value, U, r.iterations, r.converged, r.clamps);
  return 0;
}

int cmd_phase_scan(Config& cfg, const ExperimentConfig& e) {
  const auto coeffs = e.coefficients();
  const double m = cfg.get_double("scan.m", 1.0);
  const double J0 = cfg.get_double("scan.J_min", 0.0);
  const double J1 = cfg.get_double("scan.J_max", 100.0);
  const int n = cfg.get_int("scan.J_count", 11);
  require(n >= 2, "scan.J_count must be at least 2");
  ScanOptions so;
  so.profile = profile_options(cfg, e.M);
  so.profile.parallel = false;
  so.golden_tolerance = cfg.get_double("scan.golden_tolerance", so.golden_tolerance);
  so.gap_threshold = cfg.get_double("scan.gap_threshold", so.gap_threshold);
  so.bisection_resolution = cfg.get_double("scan.bisection_resolution", so.bisection_resolution);
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) grid.push_back(J0 + (J1 - J0) * i / (n - 1));
  const ScanResult res = phase_transition_scan(m, grid, coeffs, so);
  {
    CsvWriter csv(e.out / "phase_scan.csv", {"J", "U", "Psi_min", "v_star", "gap", "clamps"},
                  {fmt::format("model={} m={:.17g} M={}", e.model_label, m, e.M)});
    for (const auto& r : res.rows) csv.row(r.J, r.U, r.psi_min, r.v_star, r.gap, r.clamps);
  }
  {
    CsvWriter csv(e.out / "phase_summary.csv", {"transition_found", "J_star", "resolution", "gap_threshold"});
    csv.row(res.transition_found, res.J_star, res.resolution, so.gap_threshold);
  }
  // Witness of the largest relative gap, for the traveling-wave figure.
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.rows.size(); ++i) {
    const auto rel = [&](std::size_t k) { return res.rows[k].U > 0 ? res.rows[k].gap / res.rows[k].U : 0.0; };
    if (rel(i) > rel(best)) best = i;
  }
  if (res.rows[best].witness.size() > 0) {
    write_scalar_field(e.out / "wave_profile.csv", res.rows[best].witness);
    const auto wave = traveling_wave_path(res.rows[best].witness, res.rows[best].v_star != 0 ? res.rows[best].v_star : 1.0,
                                          res.rows[best].J);
    CsvWriter csv(e.out / "wave_summary.csv", {"J", "v", "U", "Psi_min", "eval_I_over_T"});
    csv.row(res.rows[best].J, res.rows[best].v_star, res.rows[best].U, res.rows[best].psi_min,
            eval_I(wave, coeffs).value / wave.horizon());
  }
  for (const auto& r : res.rows) {
    if (r.gap < -1e-9 * std::max(1.0, r.U)) {
      fmt::print(stderr, "negative gap {:.3e} at J = {}: the constant profile is feasible, so this is an optimizer failure\n",
                 r.gap, r.J);
      return kInvariantViolation;
    }
  }
  if (res.transition_found)
    fmt::print("transition: relative gap >= {} from J* = {:.4g} (resolution {})\n", so.gap_threshold, res.J_star,
               res.resolution);
  else
    fmt::print("no relative gap >= {} on the grid\n", so.gap_threshold);
  return 0;
}

int cmd_phi_path(Config& cfg, const ExperimentConfig& e) {
  const auto coeffs = e.coefficients();
  const Point Jp = point_from(cfg.get_doubles("phi.J", {0.5}));
  const auto Ts = cfg.get_doubles("phi.T", {1.0, 2.0, 3.0});
  const int K = cfg.get_int("phi.K", 64);
  PathOptions po;
  po.max_iterations = cfg.get_int("phi.max_iterations", po.max_iterations);
  const TorusGrid g(e.d, e.M);
  const ScalarField gamma = ScalarField::sample(g, e.profile.function());
  const VectorField J = VectorField::constant(g, Jp);
  const auto results = kernels::map_replicas_omp(
      Ts.size(), [&](std::size_t i) { return optimize_PhiT(J, gamma, Ts[i], static_cast<std::size_t>(K), coeffs, po); });
  CsvWriter csv(e.out / "phi_path.csv", {"T", "Phi_T", "T_Phi_T", "iterations", "converged", "endpoint_error"},
                {fmt::format("model={} M={} K={}", e.model_label, e.M, K)});
  int status = 0;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    const auto& r = results[i];
    csv.row(Ts[i], r.value, Ts[i] * r.value, r.iterations, r.converged, r.endpoint_error);
    if (r.endpoint_error > 1e-8 * std::max(1.0, Ts[i])) status = kInvariantViolation;
  }
  if (!results.empty())
    write_path(e.out / "phi_densities.csv", e.out / "phi_currents.csv", results.back().path);
  return status;
}

int cmd_is_estimate(Config& cfg, const ExperimentConfig& e) {
  IsOptions o;
  o.d = e.d;
  o.N = e.N;
  o.T = e.T;
  o.E = point_from(cfg.get_doubles("field.E", {1.0}));
  o.m = e.profile.m;
  o.replicas = cfg.get_int("is.replicas", 500);
  o.seed = e.seed;
  const IsReport rep = run_is_estimate(o);
  {
    CsvWriter csv(e.out / "is_replicas.csv", {"replica", "log_rn", "current"});
    for (std::size_t i = 0; i < rep.replicas.size(); ++i)
      csv.row(i, rep.replicas[i].log_rn, rep.replicas[i].current);
  }
  CsvWriter csv(e.out / "is_summary.csv",
                {"mean_current", "rate_estimate", "rate_stderr", "U_at_mean_current", "relative_difference"});
  csv.row(rep.mean_current, rep.rate_estimate, rep.rate_stderr, rep.U, rep.relative_difference);
  fmt::print("mean current {:.6g}, rate estimate {:.6g} +- {:.2g}, U_m {:.6g}, relative difference {:.3g}\n",
             rep.mean_current, rep.rate_estimate, rep.rate_stderr, rep.U, rep.relative_difference);
  return 0;
}

int cmd_selftest(const ExperimentConfig& e) {
  const auto results = run_selftests();
  CsvWriter csv(e.out / "selftest.csv", {"module", "name", "passed", "detail"});
  int failed = 0;
  for (const auto& r : results) {
    std::string detail = r.detail;
    std::replace(detail.begin(), detail.end(), ',', ';');
    std::string name = r.name;
    std::replace(name.begin(), name.end(), ',', ';');
    csv.row(r.module, name, r.passed, detail);
    fmt::print("[{}] {}: {}{}\n", r.passed ? "pass" : "FAIL", r.module, r.name,
               r.detail.empty() ? "" : " (" + r.detail + ")");
    failed += r.passed ? 0 : 1;
  }
  fmt::print("{} of {} checks passed\n", results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluctlab: current fluctuations of lattice gases, microscopic and macroscopic"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "overrides run.seed");
  app.add_option("--out", out_dir, "output directory (overrides run.out)");
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  app.fallthrough();

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "run one microscopic trajectory (ssep, wasep or kmp)"},
      {"lln-check", "SSEP law of large numbers against the heat equation"},
      {"wasep-check", "WASEP law of large numbers against the driven parabolic equation"},
      {"rate-eval", "evaluate the joint rate functional I on a path"},
      {"density-rate", "density rate via the elliptic problem, with the gradient-form current"},
      {"umin", "minimize the static functional U_m"},
      {"psi-scan", "traveling-wave functional Psi_v over a grid of speeds"},
      {"phase-scan", "U versus min_v Psi_v over a grid of currents"},
      {"phi-path", "finite-horizon Phi_T by path optimization"},
      {"is-estimate", "importance-sampling estimate of the current rate"},
      {"selftest", "definition-level checks of every module"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);
  CLI11_PARSE(app, argc, argv);
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    if (threads > 0) omp_set_num_threads(threads);
    Config cfg = config_path.empty() ? Config::parse("", "<defaults>") : Config::load(config_path);
    if (app.count("--seed")) cfg.set("run.seed", std::to_string(seed));
    if (!out_dir.empty()) cfg.set("run.out", out_dir);
    ExperimentConfig e = ExperimentConfig::from(cfg);
    fs::create_directories(e.out);

    int status = 0;
    if (sub == "simulate") status = cmd_simulate(cfg, e);
    else if (sub == "lln-check") status = cmd_lln(cfg, e, false);
    else if (sub == "wasep-check") status = cmd_lln(cfg, e, true);
    else if (sub == "rate-eval") status = cmd_rate_eval(cfg, e);
    else if (sub == "density-rate") status = cmd_density_rate(cfg, e);
    else if (sub == "umin") status = cmd_umin(cfg, e);
    else if (sub == "psi-scan") status = cmd_psi_scan(cfg, e);
    else if (sub == "phase-scan") status = cmd_phase_scan(cfg, e);
    else if (sub == "phi-path") status = cmd_phi_path(cfg, e);
    else if (sub == "is-estimate") status = cmd_is_estimate(cfg, e);
    else if (sub == "selftest") status = cmd_selftest(e);

    for (const auto& k : cfg.unused()) fmt::print(stderr, "warning: config key '{}' is not used by {}\n", k, sub);
    write_manifest(e.out, sub, cfg);
    return status;
  } catch (const ConfigError& err) {
    fmt::print(stderr, "config error: {}\n", err.what());
    return 64;
  } catch (const InfeasiblePath& err) {
    fmt::print(stderr, "infeasible path: {}\n", err.what());
    return kInvariantViolation;
  } catch (const std::exception& err) {
    fmt::print(stderr, "error: {}\n", err.what());
    return 1;
  }
}
