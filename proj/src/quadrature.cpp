#include "lamopt/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace lamopt {

namespace {

// (P_n(x), P_n'(x)) by the three-term recurrence.
std::pair<double, double> legendre(int n, double x) {
  double p0 = 1, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  return {p1, n * (x * p1 - p0) / (x * x - 1)};
}

}  // namespace

Rule1D gauss_legendre(int n) {
  if (n < 1 || n > 8) throw std::invalid_argument("gauss_legendre: n must be in 1..8");
  Rule1D rule;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    for (int it = 0; it < 100; ++it) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(n, x).second;
    // [-1, 1] -> [0, 1], ascending
    rule.points[n - 1 - i] = (x + 1) / 2;
    rule.weights[n - 1 - i] = 1.0 / ((1 - x * x) * dp * dp);
  }
  return rule;
}

Rule2D tensor_rule(int n) {
  const Rule1D r = gauss_legendre(n);
  Rule2D out;
  out.points_per_direction = n;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      out.points.emplace_back(r.points[i], r.points[j]);
      out.weights.push_back(r.weights[i] * r.weights[j]);
    }
  return out;
}

}  // namespace lamopt
