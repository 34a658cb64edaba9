#pragma once

// Gauss-Legendre rules on [0, 1] and their tensor products on the unit square,
// plus the 1D quadratic Lagrange basis used by the Q2 element.

#include <Eigen/Core>

#include <array>
#include <vector>

namespace lamopt {

struct Rule1D {
  std::vector<double> points;   ///< in [0, 1]
  std::vector<double> weights;  ///< sum to 1
};

/// n-point Gauss-Legendre rule on [0, 1], exact for degree 2n - 1; n in 1..8.
Rule1D gauss_legendre(int n);

struct Rule2D {
  std::vector<Eigen::Vector2d> points;  ///< in [0, 1]^2, x index fastest
  std::vector<double> weights;          ///< sum to 1
  int points_per_direction = 0;

  int size() const { return static_cast<int>(points.size()); }
};

Rule2D tensor_rule(int n);

/// Quadratic Lagrange basis on [0, 1] with nodes 0, 1/2, 1.
inline std::array<double, 3> quadratic_basis(double s) {
  return {(1 - s) * (1 - 2 * s), 4 * s * (1 - s), s * (2 * s - 1)};
}

inline std::array<double, 3> quadratic_basis_derivative(double s) {
  return {4 * s - 3, 4 - 8 * s, 4 * s - 1};
}

}  // namespace lamopt
