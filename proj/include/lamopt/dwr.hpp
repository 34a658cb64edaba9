#pragma once

// Goal-oriented error indicators for the compliance of an optimal laminate
// design. Since the dual solution of the compliance functional is -u, each
// element indicator pairs residuals of u_h with interpolation weights that are
// approximated by comparing u_h (and the parameters derived from it) with a
// bi-quartic patch interpolant.

#include "lamopt/elasticity.hpp"
#include "lamopt/optimizer.hpp"

#include <optional>
#include <vector>

namespace lamopt {

struct ElementIndicators {
  std::vector<double> rho_u_cell, rho_u_edge, rho_m, rho_theta;
  std::vector<double> omega_u_cell, omega_u_edge, omega_m, omega_theta;
  std::vector<double> eta;
  /// Cells without a 2x2 sibling patch, whose weights use the fallback rules.
  std::vector<bool> fallback;

  double total() const;
  Index fallback_count() const;
};

/// Stress of u_h under a tensor field, projected per element onto
/// bi-quadratic polynomials by least squares from its quadrature point values.
class StressProjection {
 public:
  StressProjection(const DisplacementField& u, const TensorField& c);

  /// Voigt stress (s11, s22, s12) of the projection at a local point.
  Eigen::Vector3d stress(Index cell, const Eigen::Vector2d& local) const;
  Eigen::Vector2d divergence(Index cell, const Eigen::Vector2d& local) const;
  Eigen::Vector2d traction(Index cell, const Eigen::Vector2d& local,
                           const Eigen::Vector2d& normal) const;
  const Q2Space& space() const { return *space_; }

 private:
  std::shared_ptr<const Q2Space> space_;
  std::vector<Eigen::Matrix<double, 3, 9>> coefficients_;  ///< nodal values of the fit
};

/// L2 norm over the cell of div sigma_h.
double cell_residual(const StressProjection& sigma, Index cell);

/// L2 norm over the cell boundary of half the traction jump on interior
/// edges (hanging edges paired piece by piece) and of sigma_h n - g on the
/// Neumann boundary; components fixed by Dirichlet data do not contribute.
double edge_residual(const StressProjection& sigma, Index cell);

/// 1D Lagrange basis on the five equispaced nodes of [0, 1] and its derivative.
std::array<double, 5> quartic_basis(double s);
std::array<double, 5> quartic_basis_derivative(double s);

/// Bi-quartic interpolant of u_h on a 2x2 sibling patch through the 5x5 grid
/// of Q2 nodes (column k = i + 5 j at patch point (i/4, j/4)).
struct PatchQuartic {
  ElementPatch patch;
  Eigen::Matrix<double, 2, 25> values;

  Eigen::Vector2d value_at(const Eigen::Vector2d& x) const;
  Eigen::Matrix2d gradient_at(const Eigen::Vector2d& x) const;
};

PatchQuartic build_patch_quartic(const DisplacementField& u, const ElementPatch& patch);

/// Higher-order reconstruction of u_h seen from one cell: the patch quartic,
/// or, without a sibling patch, a bi-quadratic least-squares fit to the nodal
/// values of the cell and its edge neighbours.
class Reconstruction {
 public:
  Reconstruction(const DisplacementField& u, Index cell);

  bool fallback() const { return !quartic_; }
  const std::optional<PatchQuartic>& quartic() const { return quartic_; }
  Eigen::Vector2d value(const Eigen::Vector2d& local) const;
  Eigen::Matrix2d strain(const Eigen::Vector2d& local) const;

 private:
  const QuadMesh* mesh_;
  Index cell_;
  std::optional<PatchQuartic> quartic_;
  Eigen::Matrix<double, 2, 9> fit_;  ///< fallback, nodal values in the cell's Q2 basis
};

struct PrimalWeights {
  double cell = 0;  ///< L2 over the cell of u_h - reconstruction
  double edge = 0;  ///< L2 over the cell boundary
};

PrimalWeights primal_weights(const DisplacementField& u, const Reconstruction& r, Index cell);

struct ControlResiduals {
  double m = 0;
  double theta = 0;
};

/// L1 norms over the cell of (rotated dC/dm) eps : eps and (rotated dC/dtheta) eps : eps.
ControlResiduals control_residuals(const DisplacementField& u, const DesignState& state,
                                   const IsotropicMaterial<double>& material, Index cell);

struct ControlWeights {
  double m = 0;
  double theta = 0;
};

/// Ratio parameter self-consistent with a strain at the element density:
/// Newton recovery started from the stored parameters of quadrature point q,
/// or, if Newton fails, the ratio of the stress of the stored laminate.
double recovered_ratio(const Eigen::Matrix2d& strain, const DesignState& state,
                       const IsotropicMaterial<double>& material, Index cell, int q);

/// Bilinear profile through the four element-centre densities of a patch,
/// evaluated at a point.
double bilinear_density(const ElementPatch& patch, const std::vector<double>& theta,
                        const Eigen::Vector2d& x);

/// omega_m: max over quadrature points of |m[u_h] - m[reconstruction]|.
/// omega_theta: max over the cell of |theta_T - bilinear patch profile|
/// (attained at a vertex); 0 without a sibling patch.
ControlWeights control_weights(const DisplacementField& u, const DesignState& state,
                               const IsotropicMaterial<double>& material,
                               const Reconstruction& r, Index cell);

/// All indicators; eta_T = rho_u w_u + rho_edge w_edge + (rho_m w_m + rho_theta w_theta) / 2.
ElementIndicators indicators(const DisplacementField& u, const DesignState& state,
                             const IsotropicMaterial<double>& material);

}  // namespace lamopt
