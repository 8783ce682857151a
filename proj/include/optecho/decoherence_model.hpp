#pragma once

#include <array>

namespace optecho {

// Phenomenological decoherence of the optically driven spin ensemble: an
// intrinsic T2 channel plus a pulse-induced channel in which each rotation
// pulse deposits spurious excitations that dephase the spin at initial rate R
// and relax away with time constant T_h. The transverse coherence then obeys
//   d<s+>/dt = [i omega - 1/T2 - R exp(-t/T_h)] <s+>,
// with t measured from the most recent pulse (each pulse refreshes the
// excitation, so the heating clock restarts at every rotation).

struct DecoherenceParams {
  double t2 = 1.0;      ///< intrinsic decoherence time, s
  double rate_r = 0.0;  ///< pulse-induced decoherence rate, 1/s
  double t_h = 1.0;     ///< heating relaxation time, s

  void validate() const;
};

/// Per-pulse coherence retention D(theta) = 1 - slope*theta, clamped to
/// [0, 1]; the linear model turns negative beyond theta = 1/slope, outside
/// the small-angle regime it was measured in.
struct PulseFidelityModel {
  double slope = 0.25;  ///< dimensionless per radian

  double retention(double theta) const;
  void validate() const;
};

/// |<s+(t)>/<s+(0)>| from integrating the Bloch equation above:
/// exp(-t/T2 - R*T_h*(1 - e^{-t/T_h})). The i*omega term is pure phase and
/// drops out of the magnitude. Throws for t < 0.
double coherence_decay_factor(double t, const DecoherenceParams& dec);

/// Echo fringe visibility at equal free-evolution intervals tau1 = tau2 = tau:
/// V0 * exp(-2 tau/T2 - 2 R T_h (1 - e^{-tau/T_h})); the factors of 2 count
/// both intervals, each with its heating clock restarted by the preceding
/// pulse. Requires v0 in [0, 1] and tau >= 0.
double visibility_model(double tau, double v0, const DecoherenceParams& dec);

/// Initial visibility predicted from the pulse angles, the pumped
/// polarization p0 and the per-pulse retention D:
///   p0 D(th1) D(th2) sin(th3) sin^2(th2/2) sin(th1)
///   / (1 - p0 cos(th3) cos(th2) cos(th1)).
/// The sin^2(th2/2) factor matches the echo-term coefficient of the
/// three-pulse closed form, to which this expression must reduce when D = 1.
/// Throws a degenerate-configuration error when the denominator vanishes.
double v0_estimate(const std::array<double, 3>& angles, double p0,
                   const PulseFidelityModel& fid);

/// Rotation angle accumulated by a detuned Gaussian pulse. Adiabatic
/// elimination of the excited state gives the effective two-photon rate
/// Omega(t)^2 / (2 Delta) (Raman convention for the 1/2); integrating the
/// envelope Omega(t) = peak_rabi * exp(-4 ln2 t^2 / fwhm^2) yields
///   theta = peak_rabi^2 * fwhm * sqrt(pi / (8 ln2)) / (2 detuning),
/// linear in pulse power. Throws unless detuning > 0 and fwhm > 0.
double effective_rotation_angle(double peak_rabi, double detuning,
                                double fwhm);

}  // namespace optecho
