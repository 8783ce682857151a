#include "optecho/fringe_analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace optecho {

namespace {

struct LinearSolution {
  Eigen::Vector4d beta;  // (a, b, A, B) for a + b t + A cos(w t) + B sin(w t)
  double rss = 0.0;
};

LinearSolution solve_linear_at(const Eigen::VectorXd& tc,
                               const Eigen::VectorXd& y, double w) {
  const auto n = tc.size();
  Eigen::MatrixXd design(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ph = w * tc[i];
    design(i, 0) = 1.0;
    design(i, 1) = tc[i];
    design(i, 2) = std::cos(ph);
    design(i, 3) = std::sin(ph);
  }
  LinearSolution sol;
  sol.beta = design.colPivHouseholderQr().solve(y);
  sol.rss = (y - design * sol.beta).squaredNorm();
  return sol;
}

Eigen::Matrix4d normal_matrix_at(const Eigen::VectorXd& tc, double w) {
  const auto n = tc.size();
  Eigen::MatrixXd design(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ph = w * tc[i];
    design(i, 0) = 1.0;
    design(i, 1) = tc[i];
    design(i, 2) = std::cos(ph);
    design(i, 3) = std::sin(ph);
  }
  return design.transpose() * design;
}

}  // namespace

void FringeScan::validate() const {
  if (counts.size() != delays.size()) {
    throw std::invalid_argument("FringeScan: delays/counts length mismatch");
  }
  if (delays.size() < 8) {
    throw std::invalid_argument("FringeScan: need at least 8 points");
  }
  for (std::size_t i = 0; i < delays.size(); ++i) {
    if (!std::isfinite(delays[i])) {
      throw std::invalid_argument("FringeScan: non-finite delay");
    }
    if (i > 0 && !(delays[i] > delays[i - 1])) {
      throw std::invalid_argument("FringeScan: delays not strictly increasing");
    }
    if (!(counts[i] >= 0.0)) {
      throw std::invalid_argument("FringeScan: negative counts");
    }
  }
}

void VisibilityCurve::validate() const {
  if (visibilities.size() != separations.size()) {
    throw std::invalid_argument("VisibilityCurve: length mismatch");
  }
  if (!errors.empty() && errors.size() != separations.size()) {
    throw std::invalid_argument("VisibilityCurve: errors length mismatch");
  }
  for (std::size_t i = 0; i < separations.size(); ++i) {
    if (!(visibilities[i] >= 0.0 && visibilities[i] <= 1.0)) {
      throw std::invalid_argument("VisibilityCurve: visibility outside [0, 1]");
    }
    if (!errors.empty() && !(errors[i] > 0.0)) {
      throw std::invalid_argument("VisibilityCurve: errors must be > 0");
    }
  }
}

FringeFit fit_fringe(const FringeScan& scan, double freq_guess) {
  const std::size_t n = scan.delays.size();
  if (scan.counts.size() != n) {
    throw std::invalid_argument("fit_fringe: delays/counts length mismatch");
  }
  if (n < 6) {
    throw std::invalid_argument("fit_fringe: underdetermined, need >= 6 points");
  }
  if (!(freq_guess > 0.0) || !std::isfinite(freq_guess)) {
    throw std::invalid_argument("fit_fringe: freq_guess must be > 0");
  }

  Eigen::VectorXd tc(n), y(n);
  double t_ref = 0.0;
  for (std::size_t i = 0; i < n; ++i) t_ref += scan.delays[i];
  t_ref /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    tc[i] = scan.delays[i] - t_ref;
    y[i] = scan.counts[i];
  }

  const double lo = 0.8 * freq_guess;
  const double hi = 1.2 * freq_guess;

  // Coarse residual scan. The grid must resolve the RSS oscillation whose
  // period in w is ~2*pi/span, so scale the count with the number of fringe
  // periods covered.
  const double span = scan.delays.back() - scan.delays.front();
  const double periods = span * freq_guess / (2.0 * std::numbers::pi);
  const int n_grid =
      std::max(101, 16 * static_cast<int>(std::ceil(periods)) + 1);
  std::vector<double> grid_rss(n_grid);
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_grid; ++i) {
    const double w = lo + (hi - lo) * i / (n_grid - 1);
    grid_rss[i] = solve_linear_at(tc, y, w).rss;
    best = std::min(best, grid_rss[i]);
  }
  // Ties within tolerance resolve to the grid point nearest the guess.
  const double tie_tol = 1e-10 * (std::abs(best) + 1e-300);
  int pick = -1;
  const double guess_idx = (freq_guess - lo) / (hi - lo) * (n_grid - 1);
  for (int i = 0; i < n_grid; ++i) {
    if (grid_rss[i] <= best + tie_tol) {
      if (pick < 0 ||
          std::abs(i - guess_idx) < std::abs(pick - guess_idx)) {
        pick = i;
      }
    }
  }

  // Golden-section descent inside the bracketing grid cells.
  const double step = (hi - lo) / (n_grid - 1);
  double a = std::max(lo, lo + step * (pick - 1));
  double b = std::min(hi, lo + step * (pick + 1));
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - ratio * (b - a);
  double x2 = a + ratio * (b - a);
  double f1 = solve_linear_at(tc, y, x1).rss;
  double f2 = solve_linear_at(tc, y, x2).rss;
  for (int iter = 0; iter < 200 && (b - a) > 1e-13 * freq_guess; ++iter) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - ratio * (b - a);
      f1 = solve_linear_at(tc, y, x1).rss;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + ratio * (b - a);
      f2 = solve_linear_at(tc, y, x2).rss;
    }
  }
  const double w_best = 0.5 * (a + b);
  if (w_best - lo < 1e-6 * (hi - lo) || hi - w_best < 1e-6 * (hi - lo)) {
    std::ostringstream msg;
    msg << "fit_fringe: frequency refinement stopped at the search bound ("
        << w_best << " rad/s, bracket [" << lo << ", " << hi << "])";
    throw NoConvergenceError(msg.str());
  }

  const LinearSolution sol = solve_linear_at(tc, y, w_best);
  const double amp_a = sol.beta[0];
  const double amp_b = sol.beta[1];
  const double cos_amp = sol.beta[2];
  const double sin_amp = sol.beta[3];
  const double c = std::hypot(cos_amp, sin_amp);

  FringeFit fit;
  fit.offset = amp_a;
  fit.drift = amp_b;
  fit.amplitude = c;
  fit.phase = std::atan2(-sin_amp, cos_amp);
  fit.frequency = w_best;
  fit.t_ref = t_ref;
  fit.n_points = static_cast<int>(n);
  fit.residual_rms = std::sqrt(sol.rss / static_cast<double>(n));

  // Covariance of the linear subproblem at fixed w, residual-scaled.
  const double dof = static_cast<double>(n) - 4.0;
  const double s2 = dof > 0.0 ? sol.rss / dof : 0.0;
  const Eigen::Matrix4d cov =
      s2 * normal_matrix_at(tc, w_best).ldlt().solve(Eigen::Matrix4d::Identity());
  fit.var_offset = cov(0, 0);
  if (c > 0.0) {
    const double ux = cos_amp / c;
    const double uy = sin_amp / c;
    fit.var_amplitude =
        ux * ux * cov(2, 2) + 2.0 * ux * uy * cov(2, 3) + uy * uy * cov(3, 3);
    fit.cov_offset_amplitude = ux * cov(0, 2) + uy * cov(0, 3);
  } else {
    // Direction undefined at c = 0; use the isotropic average.
    fit.var_amplitude = 0.5 * (cov(2, 2) + cov(3, 3));
    fit.cov_offset_amplitude = 0.0;
  }
  return fit;
}

std::array<double, 2> visibility_from_fit(const FringeFit& fit) {
  if (!(fit.amplitude >= 0.0)) {
    throw std::invalid_argument("visibility_from_fit: negative amplitude");
  }
  if (!(fit.offset > fit.amplitude)) {
    throw std::invalid_argument(
        "visibility_from_fit: unphysical fit, offset must exceed amplitude");
  }
  const double a = fit.offset;
  const double c = fit.amplitude;
  const double v = c / a;
  const double var_v = (fit.var_amplitude + v * v * fit.var_offset -
                        2.0 * v * fit.cov_offset_amplitude) /
                       (a * a);
  return {v, std::sqrt(std::max(0.0, var_v))};
}

double decay_model(double tau, double v0, double t2, double rate_r,
                   double t_h) {
  return v0 * std::exp(-2.0 * tau / t2 -
                       2.0 * rate_r * t_h * (1.0 - std::exp(-tau / t_h)));
}

namespace {

constexpr const char* kParamNames[4] = {"v0", "t2", "rate_r", "t_h"};

// Residuals and Jacobian with respect to u = log(p).
void decay_residuals(const Eigen::VectorXd& taus, const Eigen::VectorXd& vis,
                     const Eigen::VectorXd& inv_sigma,
                     const Eigen::Vector4d& u, Eigen::VectorXd& r,
                     Eigen::MatrixXd& jac) {
  const double v0 = std::exp(u[0]);
  const double t2 = std::exp(u[1]);
  const double rr = std::exp(u[2]);
  const double th = std::exp(u[3]);
  for (Eigen::Index i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    const double relax = 1.0 - std::exp(-tau / th);
    const double model = decay_model(tau, v0, t2, rr, th);
    r[i] = (model - vis[i]) * inv_sigma[i];
    const double mw = model * inv_sigma[i];
    // d model/d u_j = p_j * d model/d p_j
    jac(i, 0) = mw;
    jac(i, 1) = mw * (2.0 * tau / t2);
    jac(i, 2) = mw * (-2.0 * rr * th * relax);
    jac(i, 3) =
        mw * (-2.0 * rr * th * relax + 2.0 * rr * tau * std::exp(-tau / th));
  }
}

}  // namespace

DecayFitResult fit_visibility_decay(const VisibilityCurve& curve,
                                    const DecayFitSeed& seed) {
  curve.validate();
  const std::size_t n = curve.separations.size();
  if (n < 6) {
    throw std::invalid_argument(
        "fit_visibility_decay: need at least 6 points");
  }
  const double seeds[4] = {seed.v0, seed.t2, seed.rate_r, seed.t_h};
  for (double s : seeds) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument(
          "fit_visibility_decay: seed parameters must be positive");
    }
  }

  DecayFitResult result;
  Eigen::VectorXd taus(n), vis(n), inv_sigma(n);
  for (std::size_t i = 0; i < n; ++i) {
    taus[i] = 0.5 * curve.separations[i];
    vis[i] = curve.visibilities[i];
    inv_sigma[i] = curve.errors.empty() ? 1.0 : 1.0 / curve.errors[i];
  }
  if (curve.errors.empty()) {
    result.notes.push_back(
        "no per-point errors supplied; fitted with unit weights");
  }

  Eigen::Vector4d u{std::log(seed.v0), std::log(seed.t2),
                    std::log(seed.rate_r), std::log(seed.t_h)};
  Eigen::VectorXd r(n);
  Eigen::MatrixXd jac(n, 4);
  decay_residuals(taus, vis, inv_sigma, u, r, jac);
  double chi2 = r.squaredNorm();

  double lambda = 1e-3;
  const int max_iter = 300;
  bool converged = false;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    const Eigen::Matrix4d hess = jac.transpose() * jac;
    const Eigen::Vector4d grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < 1e-12 * (1.0 + chi2)) {
      converged = true;
      break;
    }

    Eigen::Matrix4d damped = hess;
    for (int j = 0; j < 4; ++j) {
      damped(j, j) += lambda * std::max(hess(j, j), 1e-30);
    }
    const Eigen::Vector4d step = damped.ldlt().solve(-grad);
    if (!step.allFinite()) {
      lambda *= 10.0;
      if (lambda > 1e15) break;
      continue;
    }

    const Eigen::Vector4d u_new = u + step;
    Eigen::VectorXd r_new(n);
    Eigen::MatrixXd jac_new(n, 4);
    decay_residuals(taus, vis, inv_sigma, u_new, r_new, jac_new);
    const double chi2_new = r_new.squaredNorm();
    if (chi2_new <= chi2 && std::isfinite(chi2_new)) {
      const double drop = chi2 - chi2_new;
      u = u_new;
      r.swap(r_new);
      jac.swap(jac_new);
      chi2 = chi2_new;
      lambda = std::max(lambda * 0.3, 1e-14);
      if (drop < 1e-14 * (1.0 + chi2) ||
          step.lpNorm<Eigen::Infinity>() < 1e-12) {
        converged = true;
        break;
      }
    } else {
      lambda *= 4.0;
      if (lambda > 1e15) {
        // No direction improves: a (possibly flat) local optimum.
        converged = true;
        break;
      }
    }
  }

  result.v0 = std::exp(u[0]);
  result.t2 = std::exp(u[1]);
  result.rate_r = std::exp(u[2]);
  result.t_h = std::exp(u[3]);
  result.chi_squared = chi2;
  result.converged = converged;
  result.iterations = iter;

  if (!converged) {
    std::ostringstream msg;
    msg << "fit_visibility_decay: no convergence after " << max_iter
        << " iterations; best so far v0=" << result.v0 << " t2=" << result.t2
        << " rate_r=" << result.rate_r << " t_h=" << result.t_h
        << " chi2=" << chi2;
    throw NoConvergenceError(msg.str());
  }

  // Covariance in log space via SVD pseudo-inverse, scaled by reduced
  // chi-squared, then mapped to physical units with diag(p).
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::Vector4d sv = svd.singularValues();
  const double s_max = sv[0];
  const double rcond = 1e-7;
  Eigen::Vector4d inv_s2 = Eigen::Vector4d::Zero();
  for (int k = 0; k < 4; ++k) {
    if (sv[k] > rcond * s_max) {
      inv_s2[k] = 1.0 / (sv[k] * sv[k]);
    } else {
      // Null direction: name every parameter that carries it.
      for (int j = 0; j < 4; ++j) {
        if (std::abs(svd.matrixV()(j, k)) > 0.5) {
          const std::string name = kParamNames[j];
          if (std::find(result.degenerate_params.begin(),
                        result.degenerate_params.end(),
                        name) == result.degenerate_params.end()) {
            result.degenerate_params.push_back(name);
          }
        }
      }
    }
  }
  if (!result.degenerate_params.empty()) {
    std::string note = "degenerate parameters (no leverage on data):";
    for (const auto& p : result.degenerate_params) note += " " + p;
    result.notes.push_back(note);
  }

  const double dof = static_cast<double>(n) - 4.0;
  const double scale = dof > 0.0 ? chi2 / dof : 0.0;
  const Eigen::Matrix4d cov_log =
      svd.matrixV() * inv_s2.asDiagonal() * svd.matrixV().transpose() * scale;
  const Eigen::Vector4d p{result.v0, result.t2, result.rate_r, result.t_h};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      result.covariance[4 * i + j] = p[i] * cov_log(i, j) * p[j];
    }
    result.uncertainty[i] = std::sqrt(std::max(0.0, result.covariance[5 * i]));
  }
  return result;
}

}  // namespace optecho
