#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "optecho/decoherence_model.hpp"
#include "optecho/experiment_sim.hpp"

using namespace optecho;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

ExperimentConfig paper_config() {
  ExperimentConfig cfg;  // defaults already carry the measured values
  cfg.ensemble.p0 = 0.047;  // echo-condition angles make p0 the initial visibility
  cfg.noise = NoiseKind::none;
  cfg.drift_rate = 0.0;
  return cfg;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("optecho_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("noise-free scan equals the documented composition") {
  // sigma = 0 keeps every dephasing envelope at 1, so the expected counts
  // follow directly from the public term decomposition plus one decay factor
  // per interval, both evaluated at the nominal separation.
  ExperimentConfig cfg = paper_config();
  cfg.ensemble = {2 * kPi * 50e9, 0.0, 0.9};
  cfg.decoherence = {6.7e-6, 1.0 / 175e-9, 100e-9};
  cfg.angles = {kPi / 3, 2 * kPi / 5, kPi / 2};
  cfg.tau1 = 4 * cfg.rep_time;  // 52.8 ns, heating transient still alive
  cfg.drift_rate = 3e8;

  const FringeScan scan = simulate_fringe_scan(cfg);
  REQUIRE(scan.delays.size() == 64);
  CHECK(scan.separation == cfg.tau1);

  const double decay = coherence_decay_factor(cfg.tau1, cfg.decoherence);
  const auto coeff = sigma_z_term_coefficients(cfg.angles);
  for (std::size_t i = 0; i < scan.delays.size(); ++i) {
    const double tau2 = scan.delays[i];
    const double w0 = cfg.ensemble.omega0;
    const double sz =
        cfg.ensemble.p0 *
        (coeff[0] + coeff[1] * std::cos(w0 * cfg.tau1) * decay +
         coeff[2] * std::cos(w0 * tau2) * decay +
         coeff[3] * std::cos(w0 * (cfg.tau1 + tau2)) * decay * decay +
         coeff[4] * std::cos(w0 * (cfg.tau1 - tau2)) * decay * decay);
    const double expected =
        cfg.counts_scale * 0.5 * (1.0 + sz) + cfg.drift_rate * tau2;
    CHECK(scan.counts[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("undamped echo fringe has unit visibility at the Larmor period") {
  ExperimentConfig cfg = paper_config();
  cfg.ensemble.p0 = 1.0;
  cfg.decoherence = {1e3, 0.0, 1e-7};  // decoherence off at these scales
  const FringeScan scan = simulate_fringe_scan(cfg);
  const FringeFit fit = fit_fringe(scan, cfg.ensemble.omega0);
  const auto [vis, vis_sigma] = visibility_from_fit(fit);
  CHECK(std::abs(vis - 1.0) < 1e-9);
  CHECK(fit.frequency == doctest::Approx(cfg.ensemble.omega0).epsilon(1e-9));
}

TEST_CASE("two-pulse scan at full dephasing is flat") {
  ExperimentConfig cfg = paper_config();
  cfg.angles[2] = 0.0;
  cfg.tau1 = 2 * cfg.rep_time;  // 26.4 ns, sigma*tau1 = 26.4
  const FringeScan scan = simulate_fringe_scan(cfg);
  const FringeFit fit = fit_fringe(scan, cfg.ensemble.omega0);
  CHECK(fit.amplitude / cfg.counts_scale < 1e-8);
}

TEST_CASE("extracted visibility at one-microsecond intervals matches the measured fringe") {
  ExperimentConfig cfg = paper_config();
  cfg.tau1 = 76 * cfg.rep_time;  // 1.0032 us, the comb point nearest 2*tau1 = 2 us
  const FringeScan scan = simulate_fringe_scan(cfg);
  const auto vis = visibility_from_fit(fit_fringe(scan, cfg.ensemble.omega0));
  CHECK(vis[0] > 0.011);
  CHECK(vis[0] < 0.0122);
}

TEST_CASE("noise-free sweep reproduces the closed-form visibility decay") {
  ExperimentConfig cfg = paper_config();
  const auto separations = default_echo_separations(cfg.rep_time);
  const VisibilityCurve curve = simulate_echo_experiment(cfg, separations);
  REQUIRE(curve.separations.size() == separations.size());
  CHECK(curve.failed_separations.empty());
  for (std::size_t i = 0; i < curve.separations.size(); ++i) {
    const double expected = visibility_model(0.5 * curve.separations[i],
                                             cfg.ensemble.p0, cfg.decoherence);
    CHECK(std::abs(curve.visibilities[i] - expected) < 1e-9);
  }
}

TEST_CASE("sweep without decay channels is flat") {
  ExperimentConfig cfg = paper_config();
  cfg.ensemble.p0 = 0.5;
  cfg.decoherence = {1e6, 0.0, 1e-7};  // T2 six orders beyond the sweep
  const auto separations = default_echo_separations(cfg.rep_time);
  const VisibilityCurve curve = simulate_echo_experiment(cfg, separations);
  for (double v : curve.visibilities) {
    CHECK(std::abs(v - curve.visibilities.front()) < 1e-9);
  }
}

TEST_CASE("raising the pulse-induced rate never raises a visibility") {
  ExperimentConfig cfg = paper_config();
  const std::vector<double> separations{2 * cfg.rep_time * 2,
                                        2 * cfg.rep_time * 8,
                                        2 * cfg.rep_time * 40,
                                        2 * cfg.rep_time * 152};
  std::vector<double> previous;
  for (double rate : {0.0, 1e6, 5e6, 2e7}) {
    cfg.decoherence.rate_r = rate;
    const VisibilityCurve curve = simulate_echo_experiment(cfg, separations);
    REQUIRE(curve.visibilities.size() == separations.size());
    if (!previous.empty()) {
      for (std::size_t i = 0; i < previous.size(); ++i) {
        CHECK(curve.visibilities[i] <= previous[i] + 1e-12);
      }
    }
    previous = curve.visibilities;
  }
}

TEST_CASE("poisson sweep round trip lands inside the quoted decay-time band") {
  ExperimentConfig cfg = paper_config();
  cfg.noise = NoiseKind::poisson;
  cfg.seed = 2024;
  const auto separations = default_echo_separations(cfg.rep_time);
  const VisibilityCurve curve = simulate_echo_experiment(cfg, separations);
  const DecayFitResult res =
      fit_visibility_decay(curve, DecayFitSeed{0.03, 3e-6, 1e7, 5e-8});
  CHECK(res.converged);
  CHECK(res.t2 > 4.2e-6);
  CHECK(res.t2 < 9.2e-6);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg = paper_config();
  SUBCASE("tau1 must sit on the pulse-picker comb") {
    cfg.tau1 = 27e-9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.tau1 = -26.4e-9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("scan window limited by the dephasing time") {
    cfg.scan.span = 0.3 / cfg.ensemble.sigma;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("grid floor") {
    cfg.scan.points = 7;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SUBCASE("negative expected counts rejected") {
    cfg.drift_rate = -cfg.counts_scale / cfg.tau1;
    CHECK_THROWS_AS(simulate_fringe_scan(cfg), std::invalid_argument);
  }
  SUBCASE("sweep separations must sit on the comb") {
    CHECK_THROWS_AS(simulate_echo_experiment(cfg, {3e-9}), std::invalid_argument);
  }
}

TEST_CASE("identical configs give byte-identical files") {
  ExperimentConfig cfg = paper_config();
  cfg.noise = NoiseKind::poisson;
  cfg.seed = 7;
  TempDir dir;
  const auto meta = std::map<std::string, std::string>{
      {"seed", "7"}, {"config_hash", config_hash(cfg)}};
  save_scan(simulate_fringe_scan(cfg), (dir.path / "a.csv").string(), meta);
  save_scan(simulate_fringe_scan(cfg), (dir.path / "b.csv").string(), meta);
  CHECK(read_file(dir.path / "a.csv") == read_file(dir.path / "b.csv"));

  cfg.seed = 8;
  save_scan(simulate_fringe_scan(cfg), (dir.path / "c.csv").string(), meta);
  CHECK(read_file(dir.path / "a.csv") != read_file(dir.path / "c.csv"));
}

TEST_CASE("gaussian noise stream differs across scan indices but not runs") {
  ExperimentConfig cfg = paper_config();
  cfg.noise = NoiseKind::gaussian;
  cfg.noise_sigma_rel = 0.02;
  const FringeScan s0 = simulate_fringe_scan(cfg, 0);
  const FringeScan s0_again = simulate_fringe_scan(cfg, 0);
  const FringeScan s1 = simulate_fringe_scan(cfg, 1);
  CHECK(s0.counts == s0_again.counts);
  CHECK(s0.counts != s1.counts);
}

TEST_CASE("scan CSV round trip") {
  ExperimentConfig cfg = paper_config();
  cfg.noise = NoiseKind::poisson;
  cfg.seed = 99;
  const FringeScan scan = simulate_fringe_scan(cfg);
  TempDir dir;
  const std::string path = (dir.path / "scan.csv").string();
  save_scan(scan, path, {{"seed", "99"}});

  std::map<std::string, std::string> metadata;
  const FringeScan loaded = load_scan(path, &metadata);
  CHECK(loaded.delays == scan.delays);
  CHECK(loaded.counts == scan.counts);
  CHECK(loaded.separation == scan.separation);
  CHECK(metadata.at("seed") == "99");
}

TEST_CASE("scan CSV parse errors") {
  TempDir dir;
  const auto write = [&](const char* name, const std::string& content) {
    std::ofstream((dir.path / name)) << content;
    return (dir.path / name).string();
  };

  CHECK_THROWS_WITH_AS(load_scan(write("empty.csv", "")),
                       doctest::Contains("empty"), ParseError);
  CHECK_THROWS_WITH_AS(load_scan(write("headonly.csv", "tau2_s,counts\n")),
                       doctest::Contains("no data rows"), ParseError);
  CHECK_THROWS_WITH_AS(load_scan(write("badhead.csv", "time,counts\n1,2\n")),
                       doctest::Contains("missing columns"), ParseError);
  CHECK_THROWS_WITH_AS(
      load_scan(write("badrow.csv", "tau2_s,counts\n1e-9,10\n2e-9,oops\n")),
      doctest::Contains("line 3"), ParseError);
  CHECK_THROWS_WITH_AS(
      load_scan(write("shortrow.csv", "tau2_s,counts\n1e-9\n")),
      doctest::Contains("columns"), ParseError);

  // eight increasing rows but one negative count: structural validation
  std::string negative = "tau2_s,counts\n";
  for (int i = 0; i < 8; ++i) {
    negative += std::to_string(i) + "e-9," + (i == 5 ? "-4" : "10") + "\n";
  }
  CHECK_THROWS_AS(load_scan(write("negative.csv", negative)), std::invalid_argument);

  std::string unordered = "tau2_s,counts\n";
  for (int i = 0; i < 8; ++i) {
    unordered += std::to_string(i == 5 ? 2 : i) + "e-9,10\n";
  }
  CHECK_THROWS_AS(load_scan(write("unordered.csv", unordered)), std::invalid_argument);
}

TEST_CASE("curve CSV round trip and validation") {
  TempDir dir;
  ExperimentConfig cfg = paper_config();
  cfg.noise = NoiseKind::poisson;
  const VisibilityCurve curve = simulate_echo_experiment(
      cfg, default_echo_separations(cfg.rep_time));
  const std::string path = (dir.path / "curve.csv").string();
  save_curve(curve, path);
  const VisibilityCurve loaded = load_curve(path);
  CHECK(loaded.separations == curve.separations);
  CHECK(loaded.visibilities == curve.visibilities);
  CHECK(loaded.errors == curve.errors);

  std::ofstream(dir.path / "bad.csv") << "separation_s,visibility,error\n1e-7,1.4,0.1\n";
  CHECK_THROWS_AS(load_curve((dir.path / "bad.csv").string()), std::invalid_argument);
}

TEST_CASE("config file round trip, overrides, unknown keys") {
  TempDir dir;
  ExperimentConfig cfg = paper_config();
  cfg.ensemble.sigma = 5e8;
  cfg.scan.points = 96;
  cfg.noise = NoiseKind::gaussian;
  cfg.seed = 31415;
  const std::string path = (dir.path / "run.cfg").string();
  std::ofstream(path) << serialize_config(cfg);

  const ExperimentConfig loaded = load_config(path);
  CHECK(serialize_config(loaded) == serialize_config(cfg));
  CHECK(config_hash(loaded) == config_hash(cfg));

  ExperimentConfig other = loaded;
  apply_config_line(other, "theta3", "0");
  CHECK(other.angles[2] == 0.0);
  CHECK(config_hash(other) != config_hash(cfg));

  CHECK_THROWS_WITH_AS(apply_config_line(other, "walrus", "1"),
                       doctest::Contains("walrus"), std::invalid_argument);
  CHECK_THROWS_AS(apply_config_line(other, "noise", "purple"), std::invalid_argument);

  std::ofstream(dir.path / "bad.cfg") << "t2 6.7e-6\n";
  CHECK_THROWS_AS(load_config((dir.path / "bad.cfg").string()), ParseError);
}
