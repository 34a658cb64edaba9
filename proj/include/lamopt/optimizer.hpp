#pragma once

// Alternating compliance minimisation over optimal rank-2 laminates:
// solve elasticity for the current microstructure, take new laminate
// parameters from the stresses, then move the volume multiplier so the
// density field meets the volume budget.

#include "lamopt/elasticity.hpp"
#include "lamopt/laminate.hpp"

#include <functional>
#include <memory>
#include <vector>

namespace lamopt {

struct DesignProblem {
  BoundaryConditions bc;
  IsotropicMaterial<double> material{1, 1};
  double volume_fraction = 0.33;  ///< prescribed volume over domain area
};

/// Laminate parameters on one mesh: rotation and ratio per quadrature point
/// (index cell * points_per_cell + q), density per element.
struct DesignState {
  std::shared_ptr<const Q2Space> space;
  std::vector<double> alpha;
  std::vector<double> m;
  std::vector<double> theta;
  /// |lambda1| + |lambda2| of the stress the parameters were taken from; lets
  /// the densities be re-evaluated for another multiplier.
  std::vector<double> stress_sum;
  double multiplier = 1;

  int points_per_cell() const { return space->rule().size(); }
  LaminateParams<double> params(Index cell, int q) const {
    const std::size_t k = static_cast<std::size_t>(cell * points_per_cell() + q);
    return {alpha[k], m[k], theta[static_cast<std::size_t>(cell)]};
  }
};

/// theta = volume_fraction everywhere, m = 1/2, alpha = 0.
DesignState initial_design(std::shared_ptr<const Q2Space> space, double volume_fraction);

/// Design on a refined space: each new cell takes the density of the old leaf
/// covering it, and each new quadrature point takes alpha, m and the stress
/// sum of the nearest quadrature point of that leaf.
DesignState transfer_design(const DesignState& from, std::shared_ptr<const Q2Space> to);

/// Sum of element area times density.
double volume_of(const QuadMesh& mesh, const std::vector<double>& theta);

/// Effective tensors of a design, one per quadrature point. Points other
/// than quadrature points take the parameters of the nearest one.
class DesignTensors {
 public:
  DesignTensors(const DesignState& state, const IsotropicMaterial<double>& material);

  const Eigen::Matrix3d& at(Index cell, int q) const {
    return tensors_[static_cast<std::size_t>(cell * per_cell_ + q)];
  }
  const Eigen::Matrix3d& at(Index cell, const Eigen::Vector2d& local) const;
  TensorField field() const;

 private:
  std::vector<Eigen::Matrix3d> tensors_;
  std::vector<double> points_;  ///< 1D quadrature points
  int per_direction_ = 0;
  int per_cell_ = 0;
};

/// New (alpha, m, theta) at every quadrature point from the stress of u under
/// the current design; element densities are the mean of their quadrature
/// point values.
void update_params(const DisplacementField& u, double multiplier, const DesignTensors& tensors,
                   const IsotropicMaterial<double>& material, DesignState& state);

/// Element densities for multiplier l from the frozen stresses of the state.
std::vector<double> densities_for(const DesignState& state, double l,
                                  const IsotropicMaterial<double>& material);

struct MultiplierResult {
  double multiplier = 1;
  double volume = 0;
  bool feasible = true;  ///< false when the bracket could not straddle the target
};

/// Bisection in log l for volume(theta(l)) = target, bracket grown by doubling
/// or halving (at most 60 times). Sets state.multiplier and state.theta.
/// Bisection runs until the bracket collapses, so the returned volume is as
/// close to the target as the clamps allow; `tol` (relative) only decides
/// feasibility.
MultiplierResult adapt_multiplier(DesignState& state, double target,
                                  const IsotropicMaterial<double>& material, double tol = 1e-2);

struct IterationRecord {
  int iteration = 0;
  double compliance = 0;
  double volume = 0;      ///< volume of the design the compliance was computed for
  double multiplier = 0;  ///< multiplier of that design
  double wall_ms = 0;
};

struct OptimizeOptions {
  double tolerance = 1e-7;  ///< on |J_k - J_{k-1}| / max(1, |J_k|)
  int max_iterations = 500;
  double volume_tolerance = 1e-2;
  SolverOptions solver;
  std::function<void(const IterationRecord&)> observer;
};

struct OptimizeResult {
  DisplacementField u;
  /// Design u was computed with (its stresses define the next update).
  DesignState state;
  double compliance = 0;
  bool converged = false;
  bool feasible = true;
  std::vector<double> history;
  std::vector<IterationRecord> log;
};

/// Runs the alternating scheme on a fixed mesh. `init` (on the same space)
/// replaces the default initial design.
OptimizeResult optimize(std::shared_ptr<const Q2Space> space, const DesignProblem& problem,
                        const DesignState* init = nullptr, const OptimizeOptions& options = {});

}  // namespace lamopt
