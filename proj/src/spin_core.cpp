#include "optecho/spin_core.hpp"

#include <cmath>
#include <stdexcept>

namespace optecho {

void PulseSequence::validate() const {
  if (angles.empty()) throw std::invalid_argument("PulseSequence: no pulses");
  if (delays.size() + 1 != angles.size()) {
    throw std::invalid_argument(
        "PulseSequence: delays must number one fewer than angles");
  }
  for (double a : angles) {
    if (!std::isfinite(a)) {
      throw std::invalid_argument("PulseSequence: non-finite angle");
    }
  }
  for (double d : delays) {
    if (!(d >= 0.0)) {
      throw std::invalid_argument("PulseSequence: negative delay");
    }
  }
}

Unitary2 rot_x(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("rot_x: non-finite angle");
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  return {{c, 0.0}, {0.0, -s}, {0.0, -s}, {c, 0.0}};
}

Unitary2 rot_z(double theta) {
  if (!std::isfinite(theta)) throw std::invalid_argument("rot_z: non-finite angle");
  const Complex lo = std::polar(1.0, -0.5 * theta);
  const Complex hi = std::polar(1.0, +0.5 * theta);
  return {lo, {0.0, 0.0}, {0.0, 0.0}, hi};
}

SpinState evolve_sequence(const PulseSequence& seq, double omega,
                          const SpinState& initial) {
  seq.validate();
  if (!std::isfinite(omega)) {
    throw std::invalid_argument("evolve_sequence: non-finite omega");
  }
  SpinState state = rot_x(seq.angles[0]).apply(initial);
  for (std::size_t k = 0; k < seq.delays.size(); ++k) {
    state = rot_z(omega * seq.delays[k]).apply(state);
    state = rot_x(seq.angles[k + 1]).apply(state);
  }
  return state;
}

}  // namespace optecho
