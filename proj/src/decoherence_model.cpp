#include "optecho/decoherence_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace optecho {

void DecoherenceParams::validate() const {
  if (!(t2 > 0.0) || !std::isfinite(t2)) {
    throw std::invalid_argument("DecoherenceParams: t2 must be > 0");
  }
  if (!(rate_r >= 0.0) || !std::isfinite(rate_r)) {
    throw std::invalid_argument("DecoherenceParams: rate_r must be >= 0");
  }
  if (!(t_h > 0.0) || !std::isfinite(t_h)) {
    throw std::invalid_argument("DecoherenceParams: t_h must be > 0");
  }
}

double PulseFidelityModel::retention(double theta) const {
  validate();
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("PulseFidelityModel: non-finite angle");
  }
  const double d = 1.0 - slope * theta;
  return d < 0.0 ? 0.0 : (d > 1.0 ? 1.0 : d);
}

void PulseFidelityModel::validate() const {
  if (!(slope >= 0.0) || !std::isfinite(slope)) {
    throw std::invalid_argument("PulseFidelityModel: slope must be >= 0");
  }
}

double coherence_decay_factor(double t, const DecoherenceParams& dec) {
  dec.validate();
  if (!(t >= 0.0)) {
    throw std::invalid_argument("coherence_decay_factor: t must be >= 0");
  }
  const double heating = dec.rate_r * dec.t_h * (1.0 - std::exp(-t / dec.t_h));
  return std::exp(-t / dec.t2 - heating);
}

double visibility_model(double tau, double v0, const DecoherenceParams& dec) {
  dec.validate();
  if (!(tau >= 0.0)) {
    throw std::invalid_argument("visibility_model: tau must be >= 0");
  }
  if (!(v0 >= 0.0 && v0 <= 1.0)) {
    throw std::invalid_argument("visibility_model: v0 must lie in [0, 1]");
  }
  const double heating =
      2.0 * dec.rate_r * dec.t_h * (1.0 - std::exp(-tau / dec.t_h));
  return v0 * std::exp(-2.0 * tau / dec.t2 - heating);
}

double v0_estimate(const std::array<double, 3>& angles, double p0,
                   const PulseFidelityModel& fid) {
  if (!(p0 >= -1.0 && p0 <= 1.0)) {
    throw std::invalid_argument("v0_estimate: p0 must lie in [-1, 1]");
  }
  for (double a : angles) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("v0_estimate: non-finite angle");
    }
  }
  const double c1 = std::cos(angles[0]), s1 = std::sin(angles[0]);
  const double c2 = std::cos(angles[1]);
  const double s3 = std::sin(angles[2]);
  const double sh = std::sin(0.5 * angles[1]);
  const double denom = 1.0 - p0 * std::cos(angles[2]) * c2 * c1;
  if (std::abs(denom) < 1e-12) {
    throw std::invalid_argument(
        "v0_estimate: degenerate configuration, denominator vanishes");
  }
  const double numer =
      p0 * fid.retention(angles[0]) * fid.retention(angles[1]) * s3 * sh * sh * s1;
  return numer / denom;
}

double effective_rotation_angle(double peak_rabi, double detuning,
                                double fwhm) {
  if (!(detuning > 0.0) || !std::isfinite(detuning)) {
    throw std::invalid_argument(
        "effective_rotation_angle: detuning must be > 0");
  }
  if (!(fwhm > 0.0) || !std::isfinite(fwhm)) {
    throw std::invalid_argument("effective_rotation_angle: fwhm must be > 0");
  }
  if (!(peak_rabi >= 0.0) || !std::isfinite(peak_rabi)) {
    throw std::invalid_argument(
        "effective_rotation_angle: peak_rabi must be >= 0");
  }
  const double ln2 = std::numbers::ln2;
  return peak_rabi * peak_rabi * fwhm * std::sqrt(std::numbers::pi / (8.0 * ln2)) /
         (2.0 * detuning);
}

}  // namespace optecho
