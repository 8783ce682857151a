#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "optecho/spin_core.hpp"

namespace optecho {

// Gaussian-inhomogeneous ensemble averages of the three-pulse echo sequence:
// the closed-form <sigma_z(tau1, tau2)> plus two independent numerical
// oracles (Monte-Carlo sampling and Gauss-Hermite quadrature) for the same
// average taken over single-spin evolutions.

/// Larmor-frequency distribution and initial polarization of the ensemble.
struct EnsembleParams {
  double omega0 = 0.0;  ///< mean Larmor angular frequency, rad/s
  double sigma = 0.0;   ///< frequency spread, rad/s
  double p0 = 1.0;      ///< initial z-polarization, in [-1, 1]

  /// omega0 from a plain frequency in Hz (multiplies by 2*pi).
  static EnsembleParams from_frequency_hz(double f0, double sigma, double p0);

  /// sigma from an inhomogeneous dephasing time: sigma = 1/t2_star exactly
  /// (the proportionality constant of the order-of-magnitude relation
  /// sigma ~ 1/T2* is fixed to 1 here).
  static EnsembleParams from_t2_star(double omega0, double t2_star, double p0);

  void validate() const;
};

struct EnsembleResult {
  double mean_sigma_z = 0.0;
  double std_error = 0.0;  ///< 0 for deterministic methods
};

/// Angle-only coefficient of each of the five interference terms of the
/// three-pulse <sigma_z>, ordered as: static population term; coherence
/// surviving interval 1 only; interval 2 only; both intervals in phase
/// (tau1+tau2); and the echo term (tau1-tau2). Signs included.
std::array<double, 5> sigma_z_term_coefficients(
    const std::array<double, 3>& angles);

/// The five terms of <sigma_z> with phases, Gaussian dephasing envelopes
/// exp(-sigma^2 t^2 / 2) and the p0 scaling applied; their sum is
/// sigma_z_analytic. p0 scales every term identically: a partially polarized
/// initial mixture is p0 * (pure |down> state) + (1-p0)/2 * identity, and the
/// identity component contributes zero to <sigma_z>, so the average is exactly
/// linear in p0.
std::array<double, 5> sigma_z_terms(const std::array<double, 3>& angles,
                                    const std::array<double, 2>& taus,
                                    const EnsembleParams& ens);

/// Closed-form ensemble average of sigma_z after the three-pulse sequence.
/// Throws std::invalid_argument for negative delays.
double sigma_z_analytic(const std::array<double, 3>& angles,
                        const std::array<double, 2>& taus,
                        const EnsembleParams& ens);

/// Monte-Carlo oracle: draws omega ~ Normal(omega0, sigma^2), evolves pure
/// spins through seq, averages 2P-1 and scales by p0. Sampling is split into
/// fixed-size chunks with substreams keyed by (seed, chunk index), so a
/// parallel evaluation over chunks would reproduce the serial sample set
/// bit for bit. Deterministic for fixed seed. Requires n_samples >= 100.
EnsembleResult gaussian_average_mc(const PulseSequence& seq,
                                   const EnsembleParams& ens,
                                   std::size_t n_samples, std::uint64_t seed);

/// Deterministic Gauss-Hermite oracle over the Gaussian weight. Converges
/// once n_nodes comfortably exceeds (sigma * max tau)^2; for the regimes
/// tested here (sigma*tau <= 3), 128 nodes give ~1e-13 accuracy and 64 nodes
/// are already sufficient for 1e-10. n_nodes must lie in [8, 512].
/// sigma == 0 collapses to a single evaluation at omega0.
EnsembleResult gaussian_average_quadrature(const PulseSequence& seq,
                                           const EnsembleParams& ens,
                                           int n_nodes);

/// sin(theta3) * sin^2(theta2/2) * sin(theta1): the coefficient of the
/// dephasing-immune echo term. Maximal (= 1) at the Hahn angles
/// (pi/2, pi, pi/2).
double echo_amplitude(const std::array<double, 3>& angles);

}  // namespace optecho
