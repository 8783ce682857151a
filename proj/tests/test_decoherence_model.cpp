#include <cmath>
#include <complex>
#include <numbers>

#include "doctest.h"
#include "optecho/decoherence_model.hpp"
#include "optecho/ensemble_model.hpp"
#include "optecho/rng.hpp"

using namespace optecho;

namespace {

constexpr double kPi = std::numbers::pi;
const DecoherenceParams kPaperDecoherence{6.7e-6, 1.0 / 175e-9, 100e-9};

// Independent oracle: fixed-step RK4 integration of
//   ds/dt = [i omega - 1/T2 - R exp(-t/T_h)] s,  s(0) = 1,
// returning |s(t)|.
double ode_coherence_magnitude(double t, double omega,
                               const DecoherenceParams& dec, int n_steps) {
  using C = std::complex<double>;
  const auto rhs = [&](double time, C s) {
    return (C(0.0, omega) - C(1.0 / dec.t2, 0.0) -
            C(dec.rate_r * std::exp(-time / dec.t_h), 0.0)) *
           s;
  };
  C s{1.0, 0.0};
  const double h = t / n_steps;
  for (int i = 0; i < n_steps; ++i) {
    const double time = i * h;
    const C k1 = rhs(time, s);
    const C k2 = rhs(time + 0.5 * h, s + 0.5 * h * k1);
    const C k3 = rhs(time + 0.5 * h, s + 0.5 * h * k2);
    const C k4 = rhs(time + h, s + h * k3);
    s += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return std::abs(s);
}

}  // namespace

TEST_CASE("coherence_decay_factor basics") {
  CHECK(coherence_decay_factor(0.0, kPaperDecoherence) == 1.0);

  SUBCASE("pure exponential when the pulse channel is off") {
    const DecoherenceParams dec{2e-6, 0.0, 1e-7};
    for (double t : {1e-7, 5e-7, 3e-6}) {
      CHECK(coherence_decay_factor(t, dec) ==
            doctest::Approx(std::exp(-t / dec.t2)).epsilon(1e-14));
    }
  }
  SUBCASE("reference point ten heating times out") {
    const double v = coherence_decay_factor(1e-6, kPaperDecoherence);
    CHECK(v == doctest::Approx(0.48643287609676994).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.487).epsilon(2e-3));
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(coherence_decay_factor(-1e-9, kPaperDecoherence),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        coherence_decay_factor(1e-9, DecoherenceParams{0.0, 1e6, 1e-7}),
        std::invalid_argument);
    CHECK_THROWS_AS(
        coherence_decay_factor(1e-9, DecoherenceParams{1e-6, -1.0, 1e-7}),
        std::invalid_argument);
    CHECK_THROWS_AS(
        coherence_decay_factor(1e-9, DecoherenceParams{1e-6, 1e6, 0.0}),
        std::invalid_argument);
  }
}

TEST_CASE("closed form matches the integrated coherence equation") {
  RandomStream rng(41);
  for (int i = 0; i < 20; ++i) {
    DecoherenceParams dec;
    dec.t2 = 1e-6 * std::pow(10.0, rng.uniform());        // [1e-6, 1e-5]
    dec.rate_r = 1e4 * std::pow(10.0, 3.0 * rng.uniform());  // [1e4, 1e7]
    dec.t_h = 1e-8 * std::pow(30.0, rng.uniform());       // [1e-8, 3e-7]
    const double t = rng.uniform() * 5e-6;
    const double omega = rng.uniform() * 1e8;
    const double closed = coherence_decay_factor(t, dec);
    const double ode = ode_coherence_magnitude(t, omega, dec, 50000);
    CHECK(std::abs(closed - ode) / closed < 1e-8);
  }
}

TEST_CASE("decay factor is monotone non-increasing and stays in (0, 1]") {
  double prev = 1.0 + 1e-15;
  for (int i = 0; i < 10000; ++i) {
    const double t = 20e-6 * i / 9999.0;
    const double v = coherence_decay_factor(t, kPaperDecoherence);
    CHECK(v <= prev);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
    prev = v;
  }
}

TEST_CASE("visibility_model") {
  CHECK(visibility_model(0.0, 0.047, kPaperDecoherence) == doctest::Approx(0.047));

  SUBCASE("exponential point without pulse channel") {
    const DecoherenceParams dec{6.7e-6, 0.0, 1e-7};
    CHECK(visibility_model(0.5 * dec.t2, 0.3, dec) ==
          doctest::Approx(0.3 / std::numbers::e).epsilon(1e-13));
  }
  SUBCASE("reference point at one microsecond") {
    const double v = visibility_model(1e-6, 0.047, kPaperDecoherence);
    CHECK(v == doctest::Approx(0.011120996318545451).epsilon(1e-12));
    CHECK(std::abs(v - 0.012) / 0.012 < 0.15);
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(visibility_model(1e-6, -0.1, kPaperDecoherence),
                    std::invalid_argument);
    CHECK_THROWS_AS(visibility_model(1e-6, 1.1, kPaperDecoherence),
                    std::invalid_argument);
    CHECK_THROWS_AS(visibility_model(-1e-6, 0.5, kPaperDecoherence),
                    std::invalid_argument);
  }
}

TEST_CASE("visibility decay depends only on the dimensionless groups") {
  RandomStream rng(42);
  for (int i = 0; i < 50; ++i) {
    DecoherenceParams dec{1e-6 + rng.uniform() * 9e-6, rng.uniform() * 1e7,
                          1e-8 + rng.uniform() * 3e-7};
    const double tau = rng.uniform() * 4e-6;
    const double base = visibility_model(tau, 1.0, dec);
    const DecoherenceParams scaled{10.0 * dec.t2, 0.1 * dec.rate_r,
                                   10.0 * dec.t_h};
    CHECK(visibility_model(10.0 * tau, 1.0, scaled) ==
          doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("v0_estimate") {
  const PulseFidelityModel perfect{0.0};
  const PulseFidelityModel paper{0.25};

  SUBCASE("echo-condition angles with perfect pulses and full polarization") {
    CHECK(v0_estimate({kPi / 2, kPi, kPi / 2}, 1.0, perfect) ==
          doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("no first pulse means no coherence") {
    CHECK(v0_estimate({0.0, 1.0, 2.0}, 1.0, paper) == 0.0);
    CHECK(v0_estimate({0.0, 0.3, 2.4}, 0.9, perfect) == 0.0);
  }
  SUBCASE("pi/3 angles at the measured polarization and slope") {
    const double v = v0_estimate({kPi / 3, kPi / 3, kPi / 3}, 0.9, paper);
    CHECK(v == doctest::Approx(0.10361537946514214).epsilon(1e-12));
    CHECK(std::abs(v - 0.104) < 1e-3);
  }
  SUBCASE("degenerate denominator") {
    CHECK_THROWS_AS(v0_estimate({0.0, 0.0, 0.0}, 1.0, perfect),
                    std::invalid_argument);
  }
  SUBCASE("retention clamps to [0, 1]") {
    CHECK(paper.retention(8.0) == 0.0);   // linear model would go negative
    CHECK(paper.retention(-1.0) == 1.0);  // and above one for negative angles
    CHECK(paper.retention(2.0) == doctest::Approx(0.5));
  }
}

TEST_CASE("v0_estimate with perfect pulses equals the closed-form fringe visibility") {
  // Long equal intervals kill every dephasing-sensitive term; sweeping the
  // fine delay through half a Larmor period then reads off the fringe
  // extremes of P = (1 + <sigma_z>)/2 directly.
  RandomStream rng(43);
  const PulseFidelityModel perfect{0.0};
  const double omega0 = 2 * kPi * 50e9;
  const double sigma = 1e6;
  const double tau1 = 1e-5;  // sigma*tau1 = 10
  for (int i = 0; i < 50; ++i) {
    const std::array<double, 3> angles{0.1 + rng.uniform() * (kPi - 0.2),
                                       0.1 + rng.uniform() * (kPi - 0.2),
                                       0.1 + rng.uniform() * (kPi - 0.2)};
    const double p0 = 0.5 + rng.uniform() * 0.5;
    const EnsembleParams ens{omega0, sigma, p0};

    const double sz_peak = sigma_z_analytic(angles, {tau1, tau1}, ens);
    const double sz_trough =
        sigma_z_analytic(angles, {tau1, tau1 + kPi / omega0}, ens);
    const double p_hi = 0.5 * (1.0 + std::max(sz_peak, sz_trough));
    const double p_lo = 0.5 * (1.0 + std::min(sz_peak, sz_trough));
    const double fringe_vis = (p_hi - p_lo) / (p_hi + p_lo);

    CHECK(std::abs(v0_estimate(angles, p0, perfect) - fringe_vis) < 1e-9);
  }
}

TEST_CASE("effective_rotation_angle") {
  SUBCASE("zero drive gives zero angle") {
    CHECK(effective_rotation_angle(0.0, 2 * kPi * 1e12, 2e-12) == 0.0);
  }
  SUBCASE("linear in pulse power") {
    const double th1 = effective_rotation_angle(1e12, 2 * kPi * 1e12, 2e-12);
    const double th2 =
        effective_rotation_angle(std::numbers::sqrt2 * 1e12, 2 * kPi * 1e12, 2e-12);
    CHECK(th2 == doctest::Approx(2.0 * th1).epsilon(1e-13));
  }
  SUBCASE("closed form matches quadrature over the Gaussian envelope") {
    const double peak = 2 * kPi * 0.5e12;
    const double detuning = 2 * kPi * 1e12;
    const double fwhm = 2e-12;
    // Simpson integration of peak^2 exp(-8 ln2 t^2/fwhm^2) / (2 detuning)
    const double half_window = 20.0 * fwhm;
    const int n = 40000;  // even
    const double h = 2.0 * half_window / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = -half_window + i * h;
      const double envelope = std::exp(-4.0 * std::numbers::ln2 * t * t / (fwhm * fwhm));
      const double f = peak * peak * envelope * envelope / (2.0 * detuning);
      acc += (i == 0 || i == n) ? f : ((i % 2 == 1) ? 4.0 * f : 2.0 * f);
    }
    const double integral = acc * h / 3.0;
    const double closed = effective_rotation_angle(peak, detuning, fwhm);
    CHECK(std::abs(closed - integral) < 1e-10);
    CHECK(closed == doctest::Approx(1.1823255897158211).epsilon(1e-12));
  }
  SUBCASE("invariant under (peak -> c peak, detuning -> c^2 detuning)") {
    RandomStream rng(44);
    for (int i = 0; i < 50; ++i) {
      const double peak = rng.uniform() * 1e13;
      const double det = 1e11 + rng.uniform() * 1e13;
      const double fwhm = 1e-13 + rng.uniform() * 1e-11;
      const double c = 0.1 + rng.uniform() * 10.0;
      const double a = effective_rotation_angle(peak, det, fwhm);
      const double b = effective_rotation_angle(c * peak, c * c * det, fwhm);
      CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(effective_rotation_angle(1e12, 0.0, 2e-12),
                    std::invalid_argument);
    CHECK_THROWS_AS(effective_rotation_angle(1e12, -1e12, 2e-12),
                    std::invalid_argument);
    CHECK_THROWS_AS(effective_rotation_angle(1e12, 1e12, 0.0),
                    std::invalid_argument);
  }
}
