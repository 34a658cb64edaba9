#pragma once

// Built-in load cases and the studies run on them.

#include "lamopt/adaptivity.hpp"
#include "lamopt/optimizer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace lamopt {

struct Scenario {
  std::string name;
  /// Root layout: square roots of side root_size, nx x ny from origin, masked.
  Eigen::Vector2d origin{0, 0};
  double root_size = 1;
  int nx = 1, ny = 1;
  std::vector<bool> active{true};
  BoundaryConditions bc;
  IsotropicMaterial<double> material{1, 1};
  double volume_fraction = 0.33;  ///< prescribed volume over domain area
  double load = 1;                ///< traction magnitude, force per length

  std::shared_ptr<const QuadMesh> mesh(int level) const;
  double mesh_size(int level) const { return std::ldexp(root_size, -level); }
  DesignProblem problem() const { return {bc, material, volume_fraction}; }
};

struct ScenarioOverrides {
  std::optional<double> lame_lambda, lame_mu, load, volume_fraction;
  /// Width of partial load and support strips relative to their edge.
  double strip_fraction = 0.2;
};

/// carrier-plate, cantilever, bridge or l-shape; throws std::invalid_argument
/// for anything else.
Scenario builtin_scenario(const std::string& name, const ScenarioOverrides& overrides = {});
const std::vector<std::string>& builtin_scenario_names();

struct FitResult {
  double j_star = 0, c = 0, p = 0;
  double residual = 0;  ///< 2-norm of the fit residuals
  bool converged = false;
  bool rate_identified = true;  ///< false when c vanishes and p is arbitrary
};

/// Least-squares fit of J_h = J* + c h^p. (J*, c) are linear for fixed p; p
/// minimises the profiled residual (grid scan then golden section on
/// [0.1, 4]) and all three are polished by Gauss-Newton.
FitResult fit_extrapolation(const std::vector<std::pair<double, double>>& h_and_j);

struct UniformLevel {
  int level = 0;
  double h = 0;
  AdaptiveStep record;  ///< step = index within the study
};

struct UniformOptions {
  OptimizeOptions optimize;
  bool estimate = true;  ///< compute indicators (needed for sum_eta and VTK output)
  /// Start each level from the previous level's converged design.
  bool nested = true;
  std::function<void(const UniformLevel&, const OptimizeResult&, const ElementIndicators*)>
      observer;
};

std::vector<UniformLevel> uniform_study(const Scenario& scenario, int first_level, int last_level,
                                        const UniformOptions& options = {});

}  // namespace lamopt
