#pragma once

#include <vector>

namespace optecho {

/// Nodes and weights for the physicists' weight exp(-x^2):
/// integral f(x) exp(-x^2) dx ~ sum w_i f(x_i).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Golub-Welsch construction from the Hermite Jacobi matrix; throws for n < 1.
GaussHermiteRule gauss_hermite_rule(int n);

}  // namespace optecho
