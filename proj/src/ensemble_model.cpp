#include "optecho/ensemble_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "optecho/gauss_hermite.hpp"
#include "optecho/rng.hpp"

namespace optecho {

namespace {

// Chunk size for Monte-Carlo substreams; fixed so the (seed, chunk) keying
// yields the same sample set regardless of how chunks are scheduled.
constexpr std::size_t kMcChunk = 4096;

double gaussian_envelope(double sigma, double t) {
  const double x = sigma * t;
  return std::exp(-0.5 * x * x);
}

}  // namespace

EnsembleParams EnsembleParams::from_frequency_hz(double f0, double sigma,
                                                 double p0) {
  EnsembleParams ens{2.0 * std::numbers::pi * f0, sigma, p0};
  ens.validate();
  return ens;
}

EnsembleParams EnsembleParams::from_t2_star(double omega0, double t2_star,
                                            double p0) {
  if (!(t2_star > 0.0)) {
    throw std::invalid_argument("EnsembleParams: t2_star must be > 0");
  }
  EnsembleParams ens{omega0, 1.0 / t2_star, p0};
  ens.validate();
  return ens;
}

void EnsembleParams::validate() const {
  if (!std::isfinite(omega0)) {
    throw std::invalid_argument("EnsembleParams: non-finite omega0");
  }
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("EnsembleParams: sigma must be >= 0");
  }
  if (!(p0 >= -1.0 && p0 <= 1.0)) {
    throw std::invalid_argument("EnsembleParams: p0 must lie in [-1, 1]");
  }
}

std::array<double, 5> sigma_z_term_coefficients(
    const std::array<double, 3>& angles) {
  const double c1 = std::cos(angles[0]), s1 = std::sin(angles[0]);
  const double c2 = std::cos(angles[1]), s2 = std::sin(angles[1]);
  const double c3 = std::cos(angles[2]), s3 = std::sin(angles[2]);
  const double ch = std::cos(0.5 * angles[1]);
  const double sh = std::sin(0.5 * angles[1]);
  return {-c3 * c2 * c1, c3 * s2 * s1, s3 * s2 * c1, s3 * ch * ch * s1,
          -s3 * sh * sh * s1};
}

std::array<double, 5> sigma_z_terms(const std::array<double, 3>& angles,
                                    const std::array<double, 2>& taus,
                                    const EnsembleParams& ens) {
  ens.validate();
  if (!(taus[0] >= 0.0) || !(taus[1] >= 0.0)) {
    throw std::invalid_argument("sigma_z_terms: negative tau");
  }
  const auto coeff = sigma_z_term_coefficients(angles);
  const double w0 = ens.omega0, sg = ens.sigma;
  const double t1 = taus[0], t2 = taus[1];
  return {
      ens.p0 * coeff[0],
      ens.p0 * coeff[1] * std::cos(w0 * t1) * gaussian_envelope(sg, t1),
      ens.p0 * coeff[2] * std::cos(w0 * t2) * gaussian_envelope(sg, t2),
      ens.p0 * coeff[3] * std::cos(w0 * (t1 + t2)) *
          gaussian_envelope(sg, t1 + t2),
      ens.p0 * coeff[4] * std::cos(w0 * (t1 - t2)) *
          gaussian_envelope(sg, t1 - t2),
  };
}

double sigma_z_analytic(const std::array<double, 3>& angles,
                        const std::array<double, 2>& taus,
                        const EnsembleParams& ens) {
  const auto terms = sigma_z_terms(angles, taus, ens);
  return terms[0] + terms[1] + terms[2] + terms[3] + terms[4];
}

EnsembleResult gaussian_average_mc(const PulseSequence& seq,
                                   const EnsembleParams& ens,
                                   std::size_t n_samples, std::uint64_t seed) {
  seq.validate();
  ens.validate();
  if (n_samples < 100) {
    throw std::invalid_argument(
        "gaussian_average_mc: n_samples must be >= 100");
  }

  // Welford accumulation of 2P-1; exact zero variance for identical samples.
  double mean = 0.0, m2 = 0.0;
  std::size_t count = 0;
  const SpinState initial = spin_down();
  const std::size_t n_chunks = (n_samples + kMcChunk - 1) / kMcChunk;
  for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) {
    RandomStream rng(seed, chunk);
    const std::size_t stop =
        std::min(n_samples, (chunk + 1) * kMcChunk) - chunk * kMcChunk;
    for (std::size_t i = 0; i < stop; ++i) {
      const double omega = ens.omega0 + ens.sigma * rng.normal();
      const SpinState final_state = evolve_sequence(seq, omega, initial);
      const double value = 2.0 * flip_probability(final_state) - 1.0;
      ++count;
      const double delta = value - mean;
      mean += delta / static_cast<double>(count);
      m2 += delta * (value - mean);
    }
  }
  const double n = static_cast<double>(count);
  const double sample_var = count > 1 ? m2 / (n - 1.0) : 0.0;
  return {ens.p0 * mean, std::abs(ens.p0) * std::sqrt(sample_var / n)};
}

EnsembleResult gaussian_average_quadrature(const PulseSequence& seq,
                                           const EnsembleParams& ens,
                                           int n_nodes) {
  seq.validate();
  ens.validate();
  if (n_nodes < 8 || n_nodes > 512) {
    throw std::invalid_argument(
        "gaussian_average_quadrature: n_nodes must lie in [8, 512]");
  }

  const SpinState initial = spin_down();
  const auto sz_at = [&](double omega) {
    return 2.0 * flip_probability(evolve_sequence(seq, omega, initial)) - 1.0;
  };

  if (ens.sigma == 0.0) {
    return {ens.p0 * sz_at(ens.omega0), 0.0};
  }

  // Substituting omega = omega0 + sqrt(2) sigma x turns the Normal average
  // into the Hermite weight integral, up to the 1/sqrt(pi) normalization.
  const GaussHermiteRule rule = gauss_hermite_rule(n_nodes);
  const double scale = std::numbers::sqrt2 * ens.sigma;
  double acc = 0.0;
  for (int i = 0; i < n_nodes; ++i) {
    acc += rule.weights[i] * sz_at(ens.omega0 + scale * rule.nodes[i]);
  }
  return {ens.p0 * acc / std::sqrt(std::numbers::pi), 0.0};
}

double echo_amplitude(const std::array<double, 3>& angles) {
  const double sh = std::sin(0.5 * angles[1]);
  return std::sin(angles[2]) * sh * sh * std::sin(angles[0]);
}

}  // namespace optecho
