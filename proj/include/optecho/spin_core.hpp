#pragma once

#include <complex>
#include <vector>

namespace optecho {

// Exact single-spin SU(2) evolution: instantaneous rotations about x and free
// precession about z. Spin-1/2 convention throughout: rotations are
// exp(-i theta sigma/2), so theta = pi is a full spin flip. Global phase is
// never normalized away; only probabilities are contractual.

using Complex = std::complex<double>;

/// Two-component amplitude vector, basis order (|up>, |down>).
struct SpinState {
  Complex amp_up{0.0, 0.0};
  Complex amp_down{1.0, 0.0};

  double norm_squared() const {
    return std::norm(amp_up) + std::norm(amp_down);
  }
};

inline SpinState spin_down() { return {{0.0, 0.0}, {1.0, 0.0}}; }
inline SpinState spin_up() { return {{1.0, 0.0}, {0.0, 0.0}}; }

/// 2x2 complex matrix, row-major.
struct Unitary2 {
  Complex m00, m01, m10, m11;

  SpinState apply(const SpinState& s) const {
    return {m00 * s.amp_up + m01 * s.amp_down,
            m10 * s.amp_up + m11 * s.amp_down};
  }

  Unitary2 operator*(const Unitary2& r) const {
    return {m00 * r.m00 + m01 * r.m10, m00 * r.m01 + m01 * r.m11,
            m10 * r.m00 + m11 * r.m10, m10 * r.m01 + m11 * r.m11};
  }
};

/// Rotation angles (radians) interleaved with free-evolution delays
/// (seconds); delays.size() must equal angles.size() - 1. Angles are not
/// reduced modulo 2*pi; multi-turn values are legal.
struct PulseSequence {
  std::vector<double> angles;
  std::vector<double> delays;

  /// Throws std::invalid_argument on count mismatch, non-finite angles or
  /// negative delays.
  void validate() const;
};

/// exp(-i theta sigma_x / 2); throws on non-finite theta.
Unitary2 rot_x(double theta);

/// exp(-i theta sigma_z / 2) = diag(e^{-i theta/2}, e^{+i theta/2});
/// throws on non-finite theta.
Unitary2 rot_z(double theta);

/// Applies rot_x(angles[0]), rot_z(omega*delays[0]), ... ending with the last
/// rotation. omega is the spin's Larmor angular frequency (rad/s).
SpinState evolve_sequence(const PulseSequence& seq, double omega,
                          const SpinState& initial);

/// |amp_up|^2: probability that a spin prepared in |down> ended up flipped.
inline double flip_probability(const SpinState& s) {
  return std::norm(s.amp_up);
}

}  // namespace optecho
