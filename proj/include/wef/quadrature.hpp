#pragma once

#include <cmath>
#include <vector>

#include "wef/errors.hpp"

namespace wef {

struct QuadratureRule {
  std::vector<double> nodes;   // on [0, 1]
  std::vector<double> weights; // sum to 1
};

/// Gauss-Legendre rule mapped to [0, 1].  Nodes by Newton iteration on the
/// Legendre polynomial; deterministic to the bit.
inline QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw UserError("quadrature needs at least one node");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 64; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // mirror onto [0, 1]
    rule.nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    rule.nodes[static_cast<std::size_t>(n - 1 - i)] = 0.5 * (1.0 + x);
    rule.weights[static_cast<std::size_t>(i)] = 0.5 * w;
    rule.weights[static_cast<std::size_t>(n - 1 - i)] = 0.5 * w;
  }
  return rule;
}

} // namespace wef
