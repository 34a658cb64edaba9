#include "lamopt/adaptivity.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lamopt {

std::vector<Index> dorfler_mark(std::span<const double> eta, double fraction) {
  if (!(fraction > 0 && fraction <= 1))
    throw std::invalid_argument("dorfler_mark: fraction must lie in (0, 1]");
  for (double e : eta)
    if (!(e >= 0) || !std::isfinite(e))
      throw std::invalid_argument("dorfler_mark: indicators must be finite and nonnegative");

  std::vector<Index> order(eta.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return eta[a] > eta[b]; });
  // summing in marking order makes the full prefix reach the total exactly
  double total = 0;
  for (Index c : order) total += eta[c];
  if (total == 0) return {};

  const double goal = fraction * total;
  double sum = 0;
  std::size_t n = 0;
  while (n < order.size() && sum < goal) sum += eta[order[n++]];
  order.resize(n);
  return order;
}

AdaptiveRun adaptive_loop(std::shared_ptr<const QuadMesh> mesh, const DesignProblem& problem,
                          const AdaptiveOptions& options) {
  using Clock = std::chrono::steady_clock;
  AdaptiveRun run;
  run.fraction = options.fraction;
  std::optional<DesignState> carried;
  for (int step = 0; step <= options.max_steps; ++step) {
    const auto start = Clock::now();
    auto space = std::make_shared<const Q2Space>(mesh, problem.bc);
    std::optional<DesignState> init;
    if (carried) init = transfer_design(*carried, space);
    OptimizeResult result = optimize(space, problem, init ? &*init : nullptr, options.optimize);
    const ElementIndicators ind = indicators(result.u, result.state, problem.material);

    AdaptiveStep rec;
    rec.step = step;
    rec.elements = mesh->num_cells();
    rec.dofs = space->num_free();
    rec.compliance = result.compliance;
    rec.eta_sum = ind.total();
    rec.volume = volume_of(*mesh, result.state.theta);
    rec.multiplier = result.state.multiplier;
    rec.iterations = static_cast<int>(result.history.size());
    rec.converged = result.converged;
    rec.feasible = result.feasible;

    std::vector<Index> marked;
    const bool large = options.max_elements > 0 && rec.elements >= options.max_elements;
    if (step < options.max_steps && !large && rec.eta_sum > options.eta_threshold)
      marked = dorfler_mark(ind.eta, options.fraction);
    rec.marked = static_cast<Index>(marked.size());
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    run.steps.push_back(rec);
    if (options.observer) options.observer(StepOutput{run.steps.back(), result, ind});

    carried = result.state;
    run.last = std::move(result);
    if (marked.empty()) break;
    mesh = std::make_shared<const QuadMesh>(mesh->refine(marked));
  }
  return run;
}

}  // namespace lamopt
