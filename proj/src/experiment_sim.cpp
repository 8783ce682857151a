#include "optecho/experiment_sim.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "optecho/rng.hpp"

namespace optecho {

namespace {

bool is_multiple_of(double value, double unit) {
  if (!(unit > 0.0) || !(value > 0.0)) return false;
  const double k = std::round(value / unit);
  return k >= 1.0 && std::abs(value - k * unit) <= 1e-9 * unit;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what,
                    int line_no) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') {
    std::ostringstream msg;
    msg << what << ": bad number '" << text << "' at line " << line_no;
    throw ParseError(msg.str());
  }
  return v;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct CsvTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path, const std::string& expect_header,
                  std::size_t n_cols) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty()) continue;
    if (text[0] == '#') {
      const auto eq = text.find('=');
      if (eq != std::string::npos) {
        table.metadata[trim(text.substr(1, eq - 1))] = trim(text.substr(eq + 1));
      }
      continue;
    }
    if (!header_seen) {
      if (text != expect_header) {
        std::ostringstream msg;
        msg << path << ": missing columns, expected header '" << expect_header
            << "' at line " << line_no;
        throw ParseError(msg.str());
      }
      header_seen = true;
      continue;
    }
    std::vector<double> row;
    std::string cell;
    std::istringstream cells(text);
    while (std::getline(cells, cell, ',')) {
      row.push_back(parse_double(trim(cell), path, line_no));
    }
    if (row.size() != n_cols) {
      std::ostringstream msg;
      msg << path << ": expected " << n_cols << " columns, got " << row.size()
          << " at line " << line_no;
      throw ParseError(msg.str());
    }
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw ParseError(path + ": empty file");
  if (table.rows.empty()) throw ParseError(path + ": no data rows");
  return table;
}

void write_metadata(std::ofstream& out,
                    const std::map<std::string, std::string>& metadata) {
  for (const auto& [key, value] : metadata) {
    out << "# " << key << "=" << value << "\n";
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  ensemble.validate();
  decoherence.validate();
  for (double a : angles) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("ExperimentConfig: non-finite angle");
    }
  }
  if (!(rep_time > 0.0)) {
    throw std::invalid_argument("ExperimentConfig: rep_time must be > 0");
  }
  if (!is_multiple_of(tau1, rep_time)) {
    throw std::invalid_argument(
        "ExperimentConfig: tau1 must be a positive multiple of rep_time");
  }
  if (scan.points < 8) {
    throw std::invalid_argument("ExperimentConfig: scan_points must be >= 8");
  }
  if (!(scan.span > 0.0)) {
    throw std::invalid_argument("ExperimentConfig: scan_span must be > 0");
  }
  if (ensemble.sigma > 0.0 && scan.span > 0.2 / ensemble.sigma) {
    throw std::invalid_argument(
        "ExperimentConfig: scan_span exceeds 0.2/sigma; the tau2 window must "
        "stay well inside the inhomogeneous dephasing time");
  }
  if (!(counts_scale > 0.0)) {
    throw std::invalid_argument("ExperimentConfig: counts_scale must be > 0");
  }
  if (!std::isfinite(drift_rate)) {
    throw std::invalid_argument("ExperimentConfig: non-finite drift_rate");
  }
  if (!(noise_sigma_rel >= 0.0)) {
    throw std::invalid_argument(
        "ExperimentConfig: noise_sigma_rel must be >= 0");
  }
}

FringeScan simulate_fringe_scan(const ExperimentConfig& cfg,
                                std::uint64_t stream_index) {
  cfg.validate();

  const auto coeff = sigma_z_term_coefficients(cfg.angles);
  const double w0 = cfg.ensemble.omega0;
  const double sg = cfg.ensemble.sigma;
  const double tau1 = cfg.tau1;

  // Slow factors at the nominal point of the scan window (tau2 = tau1).
  const auto envelope = [sg](double t) {
    const double x = sg * t;
    return std::exp(-0.5 * x * x);
  };
  const double env1 = envelope(tau1);
  const double env2 = env1;
  const double env12 = envelope(2.0 * tau1);
  const double decay = coherence_decay_factor(tau1, cfg.decoherence);
  const double decay2 = decay * decay;

  const int n = cfg.scan.points;
  FringeScan scan;
  scan.separation = tau1;
  scan.delays.resize(n);
  scan.counts.resize(n);

  std::vector<double> expected(n);
  for (int i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / (n - 1) - 0.5;
    const double tau2 = tau1 + frac * cfg.scan.span;
    scan.delays[i] = tau2;
    const double sz =
        cfg.ensemble.p0 *
        (coeff[0] + coeff[1] * std::cos(w0 * tau1) * env1 * decay +
         coeff[2] * std::cos(w0 * tau2) * env2 * decay +
         coeff[3] * std::cos(w0 * (tau1 + tau2)) * env12 * decay2 +
         coeff[4] * std::cos(w0 * (tau1 - tau2)) * decay2);
    const double prob = 0.5 * (1.0 + sz);
    expected[i] = cfg.counts_scale * prob + cfg.drift_rate * tau2;
    if (expected[i] < 0.0) {
      throw std::invalid_argument(
          "simulate_fringe_scan: expected counts negative over the scan "
          "window; reduce |drift_rate|");
    }
  }

  RandomStream rng(cfg.seed, stream_index);
  for (int i = 0; i < n; ++i) {
    switch (cfg.noise) {
      case NoiseKind::none:
        scan.counts[i] = expected[i];
        break;
      case NoiseKind::gaussian:
        scan.counts[i] = std::max(
            0.0, expected[i] * (1.0 + cfg.noise_sigma_rel * rng.normal()));
        break;
      case NoiseKind::poisson:
        scan.counts[i] = static_cast<double>(rng.poisson(expected[i]));
        break;
    }
  }
  return scan;
}

VisibilityCurve simulate_echo_experiment(
    const ExperimentConfig& cfg, const std::vector<double>& separations) {
  cfg.validate();
  if (separations.empty()) {
    throw std::invalid_argument("simulate_echo_experiment: no separations");
  }
  for (double sep : separations) {
    if (!is_multiple_of(0.5 * sep, cfg.rep_time)) {
      throw std::invalid_argument(
          "simulate_echo_experiment: each separation/2 must be a positive "
          "multiple of rep_time");
    }
  }

  VisibilityCurve curve;
  for (std::size_t k = 0; k < separations.size(); ++k) {
    ExperimentConfig point_cfg = cfg;
    point_cfg.tau1 = 0.5 * separations[k];
    const FringeScan scan = simulate_fringe_scan(point_cfg, k);
    try {
      const FringeFit fit = fit_fringe(scan, cfg.ensemble.omega0);
      const auto [vis, vis_sigma] = visibility_from_fit(fit);
      curve.separations.push_back(separations[k]);
      curve.visibilities.push_back(vis);
      curve.errors.push_back(std::max(vis_sigma, 1e-15));
    } catch (const FitError&) {
      curve.failed_separations.push_back(separations[k]);
    } catch (const std::invalid_argument&) {
      curve.failed_separations.push_back(separations[k]);
    }
  }
  return curve;
}

std::vector<double> default_echo_separations(double rep_time) {
  static const int multiples[] = {1,  2,  3,  4,  5,  6,   7,   8,   10,  12, 14,
                                  16, 20, 24, 30, 40, 76,  152, 303, 455, 606};
  std::vector<double> seps;
  seps.reserve(std::size(multiples));
  for (int m : multiples) seps.push_back(2.0 * rep_time * m);
  return seps;
}

void save_scan(const FringeScan& scan, const std::string& path,
               const std::map<std::string, std::string>& metadata) {
  scan.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "# separation=" << format_double(scan.separation) << "\n";
  write_metadata(out, metadata);
  out << "tau2_s,counts\n";
  for (std::size_t i = 0; i < scan.delays.size(); ++i) {
    out << format_double(scan.delays[i]) << "," << format_double(scan.counts[i])
        << "\n";
  }
}

FringeScan load_scan(const std::string& path,
                     std::map<std::string, std::string>* metadata) {
  CsvTable table = read_csv(path, "tau2_s,counts", 2);
  FringeScan scan;
  if (auto it = table.metadata.find("separation"); it != table.metadata.end()) {
    scan.separation = parse_double(it->second, path + ": separation", 0);
  }
  for (const auto& row : table.rows) {
    scan.delays.push_back(row[0]);
    scan.counts.push_back(row[1]);
  }
  scan.validate();
  if (metadata) *metadata = std::move(table.metadata);
  return scan;
}

void save_curve(const VisibilityCurve& curve, const std::string& path,
                const std::map<std::string, std::string>& metadata) {
  curve.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_metadata(out, metadata);
  out << "separation_s,visibility,error\n";
  for (std::size_t i = 0; i < curve.separations.size(); ++i) {
    out << format_double(curve.separations[i]) << ","
        << format_double(curve.visibilities[i]) << ","
        << format_double(curve.errors[i]) << "\n";
  }
}

VisibilityCurve load_curve(const std::string& path,
                           std::map<std::string, std::string>* metadata) {
  CsvTable table = read_csv(path, "separation_s,visibility,error", 3);
  VisibilityCurve curve;
  for (const auto& row : table.rows) {
    curve.separations.push_back(row[0]);
    curve.visibilities.push_back(row[1]);
    curve.errors.push_back(row[2]);
  }
  curve.validate();
  if (metadata) *metadata = std::move(table.metadata);
  return curve;
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::poisson: return "poisson";
  }
  return "none";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "none") return NoiseKind::none;
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "poisson") return NoiseKind::poisson;
  throw std::invalid_argument("unknown noise kind '" + name +
                              "' (expected none|gaussian|poisson)");
}

void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value) {
  const auto as_double = [&](const char* what) {
    return parse_double(value, std::string("config key ") + what, 0);
  };
  if (key == "omega0") cfg.ensemble.omega0 = as_double("omega0");
  else if (key == "sigma") cfg.ensemble.sigma = as_double("sigma");
  else if (key == "p0") cfg.ensemble.p0 = as_double("p0");
  else if (key == "t2") cfg.decoherence.t2 = as_double("t2");
  else if (key == "rate_r") cfg.decoherence.rate_r = as_double("rate_r");
  else if (key == "t_h") cfg.decoherence.t_h = as_double("t_h");
  else if (key == "theta1") cfg.angles[0] = as_double("theta1");
  else if (key == "theta2") cfg.angles[1] = as_double("theta2");
  else if (key == "theta3") cfg.angles[2] = as_double("theta3");
  else if (key == "tau1") cfg.tau1 = as_double("tau1");
  else if (key == "rep_time") cfg.rep_time = as_double("rep_time");
  else if (key == "scan_points") cfg.scan.points = static_cast<int>(as_double("scan_points"));
  else if (key == "scan_span") cfg.scan.span = as_double("scan_span");
  else if (key == "counts_scale") cfg.counts_scale = as_double("counts_scale");
  else if (key == "drift_rate") cfg.drift_rate = as_double("drift_rate");
  else if (key == "noise") cfg.noise = noise_kind_from_string(value);
  else if (key == "noise_sigma_rel") cfg.noise_sigma_rel = as_double("noise_sigma_rel");
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(std::strtoull(value.c_str(), nullptr, 10));
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'");
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      std::ostringstream msg;
      msg << path << ": expected 'key = value' at line " << line_no;
      throw ParseError(msg.str());
    }
    apply_config_line(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return cfg;
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "omega0 = " << format_double(cfg.ensemble.omega0) << "\n"
      << "sigma = " << format_double(cfg.ensemble.sigma) << "\n"
      << "p0 = " << format_double(cfg.ensemble.p0) << "\n"
      << "t2 = " << format_double(cfg.decoherence.t2) << "\n"
      << "rate_r = " << format_double(cfg.decoherence.rate_r) << "\n"
      << "t_h = " << format_double(cfg.decoherence.t_h) << "\n"
      << "theta1 = " << format_double(cfg.angles[0]) << "\n"
      << "theta2 = " << format_double(cfg.angles[1]) << "\n"
      << "theta3 = " << format_double(cfg.angles[2]) << "\n"
      << "tau1 = " << format_double(cfg.tau1) << "\n"
      << "rep_time = " << format_double(cfg.rep_time) << "\n"
      << "scan_points = " << cfg.scan.points << "\n"
      << "scan_span = " << format_double(cfg.scan.span) << "\n"
      << "counts_scale = " << format_double(cfg.counts_scale) << "\n"
      << "drift_rate = " << format_double(cfg.drift_rate) << "\n"
      << "noise = " << to_string(cfg.noise) << "\n"
      << "noise_sigma_rel = " << format_double(cfg.noise_sigma_rel) << "\n"
      << "seed = " << cfg.seed << "\n";
  return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = serialize_config(cfg);
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char ch : text) {
    hash ^= ch;
    hash *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, hash);
  return buf;
}

}  // namespace optecho
