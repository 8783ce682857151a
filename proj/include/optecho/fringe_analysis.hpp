#pragma once

#include <array>
#include <string>
#include <vector>

#include "optecho/errors.hpp"

namespace optecho {

// Analysis pipeline for echo fringe data: drift-removing sinusoid fits of
// individual scans, visibility extraction with first-order error
// propagation, and a weighted Levenberg-Marquardt fit of the visibility
// decay returning (V0, T2, R, T_h) with uncertainties.

/// One scan of detector counts versus the fine delay tau2 at a fixed nominal
/// first interval tau1 (stored in `separation`).
struct FringeScan {
  std::vector<double> delays;  ///< tau2 values, seconds, strictly increasing
  std::vector<double> counts;  ///< detected signal, >= 0
  double separation = 0.0;     ///< nominal tau1, seconds

  /// Throws std::invalid_argument unless lengths match, delays increase
  /// strictly, counts are non-negative and there are at least 8 points.
  void validate() const;
};

/// Result of fitting y(t) = a + b (t - t_ref) + c cos(w (t - t_ref) + phi).
/// The abscissa is referenced to the scan centre t_ref both to condition the
/// linear solve and so that `offset` is the local mean level the visibility
/// is measured against. Amplitude is normalized to c >= 0 with the sign
/// absorbed into the phase.
struct FringeFit {
  double offset = 0.0;        ///< a, counts (level at t_ref)
  double drift = 0.0;         ///< b, counts/second
  double amplitude = 0.0;     ///< c >= 0, counts
  double phase = 0.0;         ///< phi, radians
  double frequency = 0.0;     ///< w, rad/s
  double residual_rms = 0.0;  ///< counts
  double t_ref = 0.0;         ///< abscissa reference, seconds
  int n_points = 0;

  // Linear-subproblem covariance entries at the optimum, for propagating
  // visibility uncertainty.
  double var_offset = 0.0;
  double var_amplitude = 0.0;
  double cov_offset_amplitude = 0.0;
};

/// Extracted visibility-vs-separation points. Failed per-point fits are
/// recorded in `failed_separations` instead of aborting a sweep; the three
/// data arrays contain only valid points.
struct VisibilityCurve {
  std::vector<double> separations;   ///< total separations 2*tau, seconds
  std::vector<double> visibilities;  ///< in [0, 1]
  std::vector<double> errors;        ///< 1-sigma, > 0 (may be empty: unweighted)
  std::vector<double> failed_separations;

  void validate() const;
};

struct DecayFitSeed {
  double v0 = 0.03;
  double t2 = 3e-6;
  double rate_r = 1e7;
  double t_h = 5e-8;
};

struct DecayFitResult {
  double v0 = 0.0;
  double t2 = 0.0;
  double rate_r = 0.0;
  double t_h = 0.0;
  std::array<double, 4> uncertainty{};    ///< 1-sigma, order (v0, t2, rate_r, t_h)
  std::array<double, 16> covariance{};    ///< row-major 4x4, same order
  double chi_squared = 0.0;
  bool converged = false;
  int iterations = 0;
  /// Parameters with no leverage on the data at the optimum (near-null
  /// Jacobian directions); their uncertainties are not meaningful.
  std::vector<std::string> degenerate_params;
  std::vector<std::string> notes;
};

/// Least-squares fit of a + b t + c cos(w t + phi). For fixed w the problem
/// is linear and solved exactly; w is refined within +/-20% of freq_guess by
/// a coarse residual scan followed by golden-section descent. When several
/// grid minima tie within tolerance the one nearest the guess wins. Throws
/// std::invalid_argument below 6 points and NoConvergenceError if the
/// refinement runs into the search bounds.
FringeFit fit_fringe(const FringeScan& scan, double freq_guess);

/// V = c/a, identical to (max-min)/(max+min) of the drift-removed fitted
/// sinusoid since max = a+c and min = a-c. Returns (V, sigma_V) with sigma_V
/// propagated to first order from the linear-subproblem covariance. Throws
/// std::invalid_argument unless a > c >= 0.
std::array<double, 2> visibility_from_fit(const FringeFit& fit);

/// Weighted (1/sigma^2) Levenberg-Marquardt fit of
///   V(tau) = V0 exp(-2 tau/T2 - 2 R T_h (1 - e^{-tau/T_h})),  tau = sep/2,
/// with all four parameters optimized in log space to enforce positivity
/// (which also nondimensionalizes the problem and conditions the Jacobian).
/// The covariance is formed in log space from the Jacobian at the optimum,
/// scaled by reduced chi-squared, and mapped back with diag(p); forming it
/// directly in physical units mixes column scales across ~14 decades and a
/// thresholded pseudo-inverse silently zeroes the small-scale directions.
/// Empty `errors` means unit weights (a note is recorded). Throws
/// NoConvergenceError with best-so-far diagnostics if the iteration limit is
/// reached while still improving.
DecayFitResult fit_visibility_decay(const VisibilityCurve& curve,
                                    const DecayFitSeed& seed);

/// Forward model of the fitted decay law (tau in seconds).
double decay_model(double tau, double v0, double t2, double rate_r,
                   double t_h);

}  // namespace optecho
