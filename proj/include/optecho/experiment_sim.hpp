#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "optecho/decoherence_model.hpp"
#include "optecho/ensemble_model.hpp"
#include "optecho/fringe_analysis.hpp"

namespace optecho {

// End-to-end synthetic echo experiment: pump (initial polarization p0),
// rotation pulse 1, free evolution tau1, pulse 2, free evolution tau2,
// pulse 3, readout as an affine map from flip probability to detector
// counts, with optional drift and noise.
//
// Within one scan the fine delay tau2 moves only tens of picoseconds around
// the nominal separation (the window is required to stay below 0.2/sigma),
// so the slowly varying factors - the Gaussian dephasing envelopes and the
// per-interval decay factors - are evaluated at the nominal point while the
// Larmor phases track tau2 exactly. A scan is then an exact sinusoid in
// tau2, the visibility extracted from it reproduces the closed-form decay
// law to fit precision, and the echo attenuation over tau1 + tau2 equals the
// equal-interval visibility law (the heating clock restarts at each pulse,
// so each interval contributes one decay factor).

enum class NoiseKind { none, gaussian, poisson };

struct ScanGrid {
  int points = 64;        ///< tau2 samples per scan
  double span = 60e-12;   ///< full width of the tau2 window, seconds
};

struct ExperimentConfig {
  EnsembleParams ensemble{2.0 * 3.141592653589793 * 50e9, 1e9, 0.9};
  DecoherenceParams decoherence{6.7e-6, 1.0 / 175e-9, 100e-9};
  std::array<double, 3> angles{1.5707963267948966, 3.141592653589793,
                               1.5707963267948966};
  double tau1 = 26.4e-9;       ///< must be a positive multiple of rep_time
  double rep_time = 13.2e-9;   ///< laser repetition time, seconds
  ScanGrid scan{};
  double counts_scale = 1e5;   ///< mean counts at flip probability 1
  double drift_rate = 0.0;     ///< counts per second of tau2
  NoiseKind noise = NoiseKind::poisson;
  double noise_sigma_rel = 0.05;  ///< gaussian noise, relative to the mean
  std::uint64_t seed = 0;

  void validate() const;
};

/// Simulates one fringe scan. `stream_index` keys the RNG substream (the
/// echo sweep passes the separation index, so results never depend on
/// scheduling). Deterministic for fixed (config, stream_index).
FringeScan simulate_fringe_scan(const ExperimentConfig& cfg,
                                std::uint64_t stream_index = 0);

/// Runs a scan at each total separation 2*tau (each separation/2 must be a
/// multiple of rep_time), fits the fringe and extracts visibility with
/// propagated errors. A failed per-point fit is recorded in
/// failed_separations rather than aborting the sweep. Reported errors are
/// floored at 1e-15 so that noiseless sweeps still satisfy the
/// positive-error invariant.
VisibilityCurve simulate_echo_experiment(const ExperimentConfig& cfg,
                                         const std::vector<double>& separations);

/// Separation schedule used by default for echo sweeps: dense low multiples
/// of 2*rep_time through the heating transient plus log-spaced anchors out
/// to ~16 us for the intrinsic decay.
std::vector<double> default_echo_separations(double rep_time);

// ---------------------------------------------------------------------------
// File formats. All numbers are decimal text with round-trip precision (17
// significant digits), lines end in LF. Scan CSV: `# key=value` metadata
// lines, a `tau2_s,counts` header, one row per point. Curve CSV: the same
// with a `separation_s,visibility,error` header.

void save_scan(const FringeScan& scan, const std::string& path,
               const std::map<std::string, std::string>& metadata = {});
FringeScan load_scan(const std::string& path,
                     std::map<std::string, std::string>* metadata = nullptr);

void save_curve(const VisibilityCurve& curve, const std::string& path,
                const std::map<std::string, std::string>& metadata = {});
VisibilityCurve load_curve(const std::string& path,
                           std::map<std::string, std::string>* metadata = nullptr);

// Flat key = value config file, SI units throughout; keys match the struct
// fields (omega0, sigma, p0, t2, rate_r, t_h, theta1..theta3, tau1,
// rep_time, scan_points, scan_span, counts_scale, drift_rate, noise,
// noise_sigma_rel, seed). Unknown keys are an error naming the key.
ExperimentConfig load_config(const std::string& path);
void apply_config_line(ExperimentConfig& cfg, const std::string& key,
                       const std::string& value);
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

}  // namespace optecho
