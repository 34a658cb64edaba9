#pragma once

// Adaptive loop: optimize on the current mesh, estimate, mark a fixed fraction
// of the estimated error (Dörfler), refine, carry the design over, repeat.

#include "lamopt/dwr.hpp"
#include "lamopt/optimizer.hpp"

#include <functional>
#include <span>
#include <vector>

namespace lamopt {

/// Smallest set of cells, taken in order of decreasing eta (ties by ascending
/// id), whose indicators sum to at least fraction * sum(eta). Empty when the
/// sum is zero.
std::vector<Index> dorfler_mark(std::span<const double> eta, double fraction);

struct AdaptiveStep {
  int step = 0;
  Index elements = 0;
  Index dofs = 0;  ///< free unknowns
  double compliance = 0;
  double eta_sum = 0;
  double volume = 0;
  double multiplier = 0;
  int iterations = 0;
  bool converged = false;
  bool feasible = false;
  Index marked = 0;
  double wall_ms = 0;  ///< optimize + estimate
};

/// What a step produced, for writers that need more than the summary.
struct StepOutput {
  const AdaptiveStep& record;
  const OptimizeResult& result;
  const ElementIndicators& indicators;
};

struct AdaptiveOptions {
  double fraction = 0.4;
  int max_steps = 20;
  /// Stop once sum(eta) falls to this value; off by default.
  double eta_threshold = 0;
  /// Stop once the mesh has at least this many cells; off when 0.
  Index max_elements = 0;
  OptimizeOptions optimize;
  std::function<void(const StepOutput&)> observer;
};

struct AdaptiveRun {
  std::vector<AdaptiveStep> steps;
  double fraction = 0.4;
  OptimizeResult last;
};

/// Runs steps 0..max_steps (fewer if the marking comes back empty). Each
/// refined mesh starts from transfer_design of the previous converged design.
AdaptiveRun adaptive_loop(std::shared_ptr<const QuadMesh> initial, const DesignProblem& problem,
                          const AdaptiveOptions& options = {});

}  // namespace lamopt
