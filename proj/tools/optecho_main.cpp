// optecho: simulate and analyze all-optical spin-echo experiments.
//
// Subcommands: simulate-fringe, simulate-echo, fit-fringe, fit-decay,
// sweep-angles, oracle-check. Exit codes: 0 success, 1 check/fit failure,
// 2 usage or config error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "optecho/decoherence_model.hpp"
#include "optecho/ensemble_model.hpp"
#include "optecho/experiment_sim.hpp"
#include "optecho/fringe_analysis.hpp"
#include "optecho/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigCli {
  std::optional<std::string> config_path;
  std::optional<double> omega0, sigma, p0, t2, rate_r, t_h;
  std::optional<double> theta1, theta2, theta3, tau1, rep_time;
  std::optional<int> scan_points;
  std::optional<double> scan_span, counts_scale, drift_rate, noise_sigma_rel;
  std::optional<std::string> noise;
  std::optional<std::uint64_t> seed;
};

// Same keys as the config file; precedence is flag > config file > default.
void add_config_flags(CLI::App* cmd, ConfigCli& opts) {
  cmd->add_option("--config", opts.config_path, "config file (key = value lines)");
  cmd->add_option("--omega0", opts.omega0, "mean Larmor angular frequency, rad/s");
  cmd->add_option("--sigma", opts.sigma, "Larmor frequency spread, rad/s");
  cmd->add_option("--p0", opts.p0, "initial z-polarization, [-1, 1]");
  cmd->add_option("--t2", opts.t2, "intrinsic decoherence time, s");
  cmd->add_option("--rate-r", opts.rate_r, "pulse-induced decoherence rate, 1/s");
  cmd->add_option("--t-h", opts.t_h, "heating relaxation time, s");
  cmd->add_option("--theta1", opts.theta1, "first rotation angle, rad");
  cmd->add_option("--theta2", opts.theta2, "second rotation angle, rad");
  cmd->add_option("--theta3", opts.theta3, "third rotation angle, rad");
  cmd->add_option("--tau1", opts.tau1, "first free interval, s (multiple of rep-time)");
  cmd->add_option("--rep-time", opts.rep_time, "laser repetition time, s");
  cmd->add_option("--scan-points", opts.scan_points, "tau2 samples per scan");
  cmd->add_option("--scan-span", opts.scan_span, "tau2 window width, s");
  cmd->add_option("--counts-scale", opts.counts_scale, "mean counts at flip probability 1");
  cmd->add_option("--drift-rate", opts.drift_rate, "detector drift, counts/s of tau2");
  cmd->add_option("--noise", opts.noise, "noise model: none|gaussian|poisson");
  cmd->add_option("--noise-sigma-rel", opts.noise_sigma_rel, "relative gaussian noise level");
  cmd->add_option("--seed", opts.seed, "RNG seed");
}

optecho::ExperimentConfig resolve_config(const ConfigCli& opts) {
  optecho::ExperimentConfig cfg;
  if (opts.config_path) cfg = optecho::load_config(*opts.config_path);
  if (opts.omega0) cfg.ensemble.omega0 = *opts.omega0;
  if (opts.sigma) cfg.ensemble.sigma = *opts.sigma;
  if (opts.p0) cfg.ensemble.p0 = *opts.p0;
  if (opts.t2) cfg.decoherence.t2 = *opts.t2;
  if (opts.rate_r) cfg.decoherence.rate_r = *opts.rate_r;
  if (opts.t_h) cfg.decoherence.t_h = *opts.t_h;
  if (opts.theta1) cfg.angles[0] = *opts.theta1;
  if (opts.theta2) cfg.angles[1] = *opts.theta2;
  if (opts.theta3) cfg.angles[2] = *opts.theta3;
  if (opts.tau1) cfg.tau1 = *opts.tau1;
  if (opts.rep_time) cfg.rep_time = *opts.rep_time;
  if (opts.scan_points) cfg.scan.points = *opts.scan_points;
  if (opts.scan_span) cfg.scan.span = *opts.scan_span;
  if (opts.counts_scale) cfg.counts_scale = *opts.counts_scale;
  if (opts.drift_rate) cfg.drift_rate = *opts.drift_rate;
  if (opts.noise) cfg.noise = optecho::noise_kind_from_string(*opts.noise);
  if (opts.noise_sigma_rel) cfg.noise_sigma_rel = *opts.noise_sigma_rel;
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const optecho::ExperimentConfig& cfg,
                    const std::vector<std::string>& outputs) {
  std::ofstream out(out_dir / "manifest.txt");
  out << "# command = " << command << "\n";
  out << "# config_hash = " << optecho::config_hash(cfg) << "\n";
  for (const auto& path : outputs) out << "# output = " << path << "\n";
  out << optecho::serialize_config(cfg);
}

json decay_result_to_json(const optecho::DecayFitResult& result) {
  json cov = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int j = 0; j < 4; ++j) row.push_back(result.covariance[4 * i + j]);
    cov.push_back(row);
  }
  return json{
      {"v0", result.v0},
      {"t2", result.t2},
      {"rate_r", result.rate_r},
      {"t_h", result.t_h},
      {"uncertainties",
       {{"v0", result.uncertainty[0]},
        {"t2", result.uncertainty[1]},
        {"rate_r", result.uncertainty[2]},
        {"t_h", result.uncertainty[3]}}},
      {"covariance", cov},
      {"chi_squared", result.chi_squared},
      {"converged", result.converged},
      {"iterations", result.iterations},
      {"degenerate_params", result.degenerate_params},
      {"notes", result.notes},
  };
}

int cmd_simulate_fringe(const ConfigCli& opts, const std::string& out_dir) {
  const auto cfg = resolve_config(opts);
  fs::create_directories(out_dir);
  const auto scan = optecho::simulate_fringe_scan(cfg);
  const std::string path = (fs::path(out_dir) / "fringe_scan.csv").string();
  optecho::save_scan(scan, path,
                     {{"seed", std::to_string(cfg.seed)},
                      {"config_hash", optecho::config_hash(cfg)}});
  write_manifest(out_dir, "simulate-fringe", cfg, {path});
  std::cout << "wrote " << path << " (" << scan.delays.size() << " rows)\n";
  return 0;
}

int cmd_simulate_echo(const ConfigCli& opts, const std::string& out_dir,
                      std::vector<double> separations) {
  const auto cfg = resolve_config(opts);
  fs::create_directories(out_dir);
  if (separations.empty()) {
    separations = optecho::default_echo_separations(cfg.rep_time);
  }
  const auto curve = optecho::simulate_echo_experiment(cfg, separations);
  const std::string path = (fs::path(out_dir) / "visibility_curve.csv").string();
  optecho::save_curve(curve, path,
                      {{"seed", std::to_string(cfg.seed)},
                       {"config_hash", optecho::config_hash(cfg)}});
  write_manifest(out_dir, "simulate-echo", cfg, {path});
  std::cout << "wrote " << path << " (" << curve.separations.size()
            << " points";
  if (!curve.failed_separations.empty()) {
    std::cout << ", " << curve.failed_separations.size() << " failed fits";
  }
  std::cout << ")\n";
  return 0;
}

int cmd_fit_fringe(const std::string& scan_path, double freq_guess,
                   const std::string& out_dir) {
  const auto scan = optecho::load_scan(scan_path);
  const auto fit = optecho::fit_fringe(scan, freq_guess);
  const auto [vis, vis_sigma] = optecho::visibility_from_fit(fit);
  json out{
      {"offset", fit.offset},
      {"drift", fit.drift},
      {"amplitude", fit.amplitude},
      {"phase", fit.phase},
      {"frequency", fit.frequency},
      {"residual_rms", fit.residual_rms},
      {"t_ref", fit.t_ref},
      {"n_points", fit.n_points},
      {"visibility", vis},
      {"visibility_sigma", vis_sigma},
      {"notes",
       {"visibility_sigma is first-order propagation from the "
        "linear-subproblem covariance, not a repeated-measurement spread"}},
  };
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "fringe_fit.json").string();
  std::ofstream(path) << out.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_fit_decay(const std::string& curve_path,
                  const optecho::DecayFitSeed& seed,
                  const std::string& out_dir) {
  const auto curve = optecho::load_curve(curve_path);
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "decay_fit.json").string();

  json out;
  int code = 0;
  try {
    auto result = optecho::fit_visibility_decay(curve, seed);
    result.notes.push_back(
        "per-point errors are propagated fit uncertainties, not "
        "repeated-measurement spreads");
    out = decay_result_to_json(result);
    code = result.converged ? 0 : 1;
  } catch (const optecho::NoConvergenceError& err) {
    out = json{{"converged", false}, {"error", err.what()}};
    code = 1;
  }
  std::ofstream(path) << out.dump(2) << "\n";
  std::cout << "wrote " << path << "\n";
  return code;
}

int cmd_sweep_angles(int resolution, bool argmax_only,
                     const std::string& out_dir) {
  // theta grid over [0, pi]^3; i/(resolution-1) hits pi/2 and pi exactly for
  // odd resolutions.
  const int n = resolution;
  double best = -1.0;
  std::array<double, 3> best_angles{0.0, 0.0, 0.0};
  std::ofstream csv;
  std::string path;
  if (!argmax_only) {
    fs::create_directories(out_dir);
    path = (fs::path(out_dir) / "echo_amplitude_grid.csv").string();
    csv.open(path);
    csv << "theta1,theta2,theta3,echo_amplitude\n";
  }
  for (int i = 0; i < n; ++i) {
    const double th1 = std::numbers::pi * (static_cast<double>(i) / (n - 1));
    for (int j = 0; j < n; ++j) {
      const double th2 = std::numbers::pi * (static_cast<double>(j) / (n - 1));
      for (int k = 0; k < n; ++k) {
        const double th3 =
            std::numbers::pi * (static_cast<double>(k) / (n - 1));
        const double amp = optecho::echo_amplitude({th1, th2, th3});
        if (!argmax_only) {
          char buf[128];
          std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", th1, th2,
                        th3, amp);
          csv << buf;
        }
        if (amp > best) {
          best = amp;
          best_angles = {th1, th2, th3};
        }
      }
    }
  }
  std::cout << "argmax theta = (" << best_angles[0] << ", " << best_angles[1]
            << ", " << best_angles[2] << "), echo amplitude = " << best << "\n";
  if (!argmax_only) std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_oracle_check(int cases, std::uint64_t seed, std::size_t mc_samples,
                     int quad_nodes, bool flip_echo_sign) {
  optecho::RandomStream rng(seed, 0);
  double worst_quad = 0.0, worst_mc = 0.0;
  int failures = 0;
  for (int c = 0; c < cases; ++c) {
    const std::array<double, 3> angles{rng.uniform() * 2.0 * std::numbers::pi,
                                       rng.uniform() * 2.0 * std::numbers::pi,
                                       rng.uniform() * 2.0 * std::numbers::pi};
    const double sigma = 1e7 + rng.uniform() * 1e9;
    const std::array<double, 2> taus{rng.uniform() * 3.0 / sigma,
                                     rng.uniform() * 3.0 / sigma};
    const optecho::EnsembleParams ens{rng.uniform() * 2.0 * std::numbers::pi * 50e9,
                                      sigma, 1.0};

    auto terms = optecho::sigma_z_terms(angles, taus, ens);
    if (flip_echo_sign) terms[4] = -terms[4];  // fault-injection test hook
    const double analytic =
        terms[0] + terms[1] + terms[2] + terms[3] + terms[4];

    const optecho::PulseSequence seq{{angles[0], angles[1], angles[2]},
                                     {taus[0], taus[1]}};
    const auto quad = optecho::gaussian_average_quadrature(seq, ens, quad_nodes);
    const auto mc = optecho::gaussian_average_mc(seq, ens, mc_samples, seed + c);

    const double dev_quad = std::abs(analytic - quad.mean_sigma_z);
    const double dev_mc = std::abs(analytic - mc.mean_sigma_z);
    worst_quad = std::max(worst_quad, dev_quad);
    worst_mc = std::max(worst_mc, dev_mc);
    if (dev_quad > 1e-8 || dev_mc > 4.0 * std::max(mc.std_error, 1e-12)) {
      ++failures;
    }
  }
  std::cout << "oracle check: " << cases << " cases, " << failures
            << " failures\n"
            << "worst |analytic - quadrature| = " << worst_quad << "\n"
            << "worst |analytic - monte-carlo| = " << worst_mc << "\n";
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"all-optical spin-echo simulator and analysis toolkit"};
  app.require_subcommand(1);

  ConfigCli opts;
  std::string out_dir = ".";

  auto* sim_fringe = app.add_subcommand(
      "simulate-fringe", "simulate one fringe scan and write it as CSV");
  add_config_flags(sim_fringe, opts);
  sim_fringe->add_option("--out", out_dir, "output directory");

  auto* sim_echo = app.add_subcommand(
      "simulate-echo",
      "sweep pulse separations, extract visibilities, write the curve CSV");
  add_config_flags(sim_echo, opts);
  sim_echo->add_option("--out", out_dir, "output directory");
  std::vector<double> separations;
  sim_echo->add_option("--separations", separations,
                       "total separations 2*tau (s); default: built-in sweep");

  auto* fit_fringe_cmd = app.add_subcommand(
      "fit-fringe", "fit a drift-removing sinusoid to a scan CSV");
  std::string scan_path;
  double freq_guess = 2.0 * std::numbers::pi * 50e9;
  fit_fringe_cmd->add_option("scan", scan_path, "fringe scan CSV")->required();
  fit_fringe_cmd->add_option("--freq-guess", freq_guess,
                             "fringe angular frequency guess, rad/s");
  fit_fringe_cmd->add_option("--out", out_dir, "output directory");

  auto* fit_decay_cmd = app.add_subcommand(
      "fit-decay", "fit the visibility decay law to a curve CSV");
  std::string curve_path;
  optecho::DecayFitSeed decay_seed;
  fit_decay_cmd->add_option("curve", curve_path, "visibility curve CSV")
      ->required();
  fit_decay_cmd->add_option("--guess-v0", decay_seed.v0, "initial visibility seed");
  fit_decay_cmd->add_option("--guess-t2", decay_seed.t2, "intrinsic T2 seed, s");
  fit_decay_cmd->add_option("--guess-rate-r", decay_seed.rate_r,
                            "pulse-induced rate seed, 1/s");
  fit_decay_cmd->add_option("--guess-t-h", decay_seed.t_h,
                            "heating relaxation seed, s");
  fit_decay_cmd->add_option("--out", out_dir, "output directory");

  auto* sweep = app.add_subcommand(
      "sweep-angles", "tabulate the echo amplitude over a 3D angle grid");
  int resolution = 21;
  bool argmax_only = false;
  sweep->add_option("--resolution", resolution, "grid points per axis")
      ->check(CLI::Range(3, 201));
  sweep->add_flag("--argmax-only", argmax_only, "skip the CSV, print the argmax");
  sweep->add_option("--out", out_dir, "output directory");

  auto* oracle = app.add_subcommand(
      "oracle-check",
      "check the closed form against quadrature and Monte-Carlo oracles");
  int cases = 50;
  std::uint64_t oracle_seed = 1;
  std::size_t mc_samples = 100000;
  int quad_nodes = 128;
  bool flip_echo_sign = false;
  oracle->add_option("--cases", cases, "number of random parameter sets")
      ->check(CLI::Range(1, 1000000));
  oracle->add_option("--seed", oracle_seed, "RNG seed");
  oracle->add_option("--mc-samples", mc_samples, "Monte-Carlo sample count");
  oracle->add_option("--quad-nodes", quad_nodes, "Gauss-Hermite node count");
  oracle->add_flag("--flip-echo-sign", flip_echo_sign,
                   "fault-injection hook: negate the echo term in the closed "
                   "form (the check must then fail)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // --help prints and exits 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim_fringe->parsed()) return cmd_simulate_fringe(opts, out_dir);
    if (sim_echo->parsed()) return cmd_simulate_echo(opts, out_dir, separations);
    if (fit_fringe_cmd->parsed())
      return cmd_fit_fringe(scan_path, freq_guess, out_dir);
    if (fit_decay_cmd->parsed())
      return cmd_fit_decay(curve_path, decay_seed, out_dir);
    if (sweep->parsed()) return cmd_sweep_angles(resolution, argmax_only, out_dir);
    if (oracle->parsed())
      return cmd_oracle_check(cases, oracle_seed, mc_samples, quad_nodes,
                              flip_echo_sign);
  } catch (const optecho::FitError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const optecho::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
