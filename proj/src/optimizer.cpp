#include "lamopt/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace lamopt {

DesignState initial_design(std::shared_ptr<const Q2Space> space, double volume_fraction) {
  if (!(volume_fraction > 0 && volume_fraction <= 1))
    throw std::invalid_argument("initial_design: volume fraction must lie in (0, 1]");
  DesignState s;
  s.space = std::move(space);
  const std::size_t cells = static_cast<std::size_t>(s.space->mesh().num_cells());
  const std::size_t points = cells * static_cast<std::size_t>(s.points_per_cell());
  s.alpha.assign(points, 0.0);
  s.m.assign(points, 0.5);
  s.stress_sum.assign(points, 0.0);
  s.theta.assign(cells, std::max(volume_fraction, kClampEps));
  return s;
}

DesignState transfer_design(const DesignState& from, std::shared_ptr<const Q2Space> to) {
  const QuadMesh& old_mesh = from.space->mesh();
  const QuadMesh& new_mesh = to->mesh();
  const Rule2D& old_rule = from.space->rule();
  const Rule2D& new_rule = to->rule();
  DesignState s;
  s.space = std::move(to);
  s.multiplier = from.multiplier;
  const int nq = new_rule.size();
  const std::size_t cells = static_cast<std::size_t>(new_mesh.num_cells());
  s.alpha.resize(cells * nq);
  s.m.resize(cells * nq);
  s.stress_sum.resize(cells * nq);
  s.theta.resize(cells);
  for (Index c = 0; c < new_mesh.num_cells(); ++c) {
    const auto parent = old_mesh.covering_leaf(new_mesh.cell(c));
    if (!parent) throw std::invalid_argument("transfer_design: target mesh is not a refinement");
    s.theta[c] = from.theta[*parent];
    for (int q = 0; q < nq; ++q) {
      const Eigen::Vector2d x = new_mesh.to_global(c, new_rule.points[q]);
      const Eigen::Vector2d local = old_mesh.to_local(*parent, x);
      int best = 0;
      for (int k = 1; k < old_rule.size(); ++k)
        if ((old_rule.points[k] - local).squaredNorm() <
            (old_rule.points[best] - local).squaredNorm())
          best = k;
      const std::size_t src = static_cast<std::size_t>(*parent * old_rule.size() + best);
      const std::size_t dst = static_cast<std::size_t>(c * nq + q);
      s.alpha[dst] = from.alpha[src];
      s.m[dst] = from.m[src];
      s.stress_sum[dst] = from.stress_sum[src];
    }
  }
  return s;
}

double volume_of(const QuadMesh& mesh, const std::vector<double>& theta) {
  double v = 0;
  for (Index c = 0; c < mesh.num_cells(); ++c) v += mesh.cell_area(c) * theta[c];
  return v;
}

DesignTensors::DesignTensors(const DesignState& state, const IsotropicMaterial<double>& material)
    : points_(state.space->edge_rule().points),
      per_direction_(state.space->rule().points_per_direction),
      per_cell_(state.points_per_cell()) {
  const Index cells = state.space->mesh().num_cells();
  tensors_.resize(static_cast<std::size_t>(cells * per_cell_));
  for (Index c = 0; c < cells; ++c)
    for (int q = 0; q < per_cell_; ++q)
      tensors_[static_cast<std::size_t>(c * per_cell_ + q)] =
          effective_tensor(state.params(c, q), material);
}

const Eigen::Matrix3d& DesignTensors::at(Index cell, const Eigen::Vector2d& local) const {
  auto nearest = [&](double x) {
    int best = 0;
    for (int k = 1; k < per_direction_; ++k)
      if (std::abs(points_[k] - x) < std::abs(points_[best] - x)) best = k;
    return best;
  };
  return at(cell, nearest(local.x()) + per_direction_ * nearest(local.y()));
}

TensorField DesignTensors::field() const {
  return [this](Index cell, const Eigen::Vector2d& local) { return at(cell, local); };
}

void update_params(const DisplacementField& u, double multiplier, const DesignTensors& tensors,
                   const IsotropicMaterial<double>& material, DesignState& state) {
  const Q2Space& space = u.space();
  const QuadMesh& mesh = space.mesh();
  const Rule2D& rule = space.rule();
  const int nq = rule.size();
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    double theta_sum = 0;
    for (int q = 0; q < nq; ++q) {
      const Eigen::Matrix2d eps = u.strain_at(c, rule.points[q]);
      const Eigen::Vector3d sv = tensors.at(c, q) * to_voigt_strain<double>(eps);
      const Sym2<double> sigma = from_voigt_stress<double>(sv);
      const LaminateParams<double> p = params_from_stress(sigma, multiplier, material);
      const auto e = eig_sym2(sigma);
      const std::size_t k = static_cast<std::size_t>(c * nq + q);
      state.alpha[k] = p.alpha;
      state.m[k] = p.m;
      state.stress_sum[k] = std::abs(e.lambda1) + std::abs(e.lambda2);
      theta_sum += p.theta;
    }
    state.theta[c] = theta_sum / nq;
  }
  state.multiplier = multiplier;
}

std::vector<double> densities_for(const DesignState& state, double l,
                                  const IsotropicMaterial<double>& material) {
  const Index cells = state.space->mesh().num_cells();
  const int nq = state.points_per_cell();
  std::vector<double> theta(static_cast<std::size_t>(cells));
  for (Index c = 0; c < cells; ++c) {
    double sum = 0;
    for (int q = 0; q < nq; ++q)
      sum += density_from_stress_sum(state.stress_sum[static_cast<std::size_t>(c * nq + q)], l,
                                     material);
    theta[c] = sum / nq;
  }
  return theta;
}

MultiplierResult adapt_multiplier(DesignState& state, double target,
                                  const IsotropicMaterial<double>& material, double tol) {
  const QuadMesh& mesh = state.space->mesh();
  if (!(target > 0 && target <= mesh.area() * (1 + 1e-12)))
    throw std::invalid_argument("adapt_multiplier: target volume outside (0, |D|]");
  auto volume = [&](double l) { return volume_of(mesh, densities_for(state, l, material)); };

  double l = state.multiplier > 0 && std::isfinite(state.multiplier) ? state.multiplier : 1.0;
  double v = volume(l);
  double lo = l, hi = l, v_lo = v, v_hi = v;  // volume decreases in l: v_lo >= v_hi
  bool bracketed = v == target;
  // grow the bracket until it straddles the target
  for (int k = 0; k < 60 && !bracketed; ++k) {
    if (v_hi > target) {
      lo = hi;
      v_lo = v_hi;
      hi *= 2;
      v_hi = volume(hi);
    } else {
      hi = lo;
      v_hi = v_lo;
      lo /= 2;
      v_lo = volume(lo);
    }
    bracketed = v_lo >= target && v_hi <= target;
  }

  MultiplierResult r;
  if (!bracketed) {
    // every density sits at a clamp; keep the end closest to the target
    r.multiplier = std::abs(v_lo - target) <= std::abs(v_hi - target) ? lo : hi;
  } else if (v == target) {
    r.multiplier = l;
  } else {
    for (int k = 0; k < 200 && hi / lo - 1 > 1e-15; ++k) {
      const double mid = std::sqrt(lo * hi);
      const double vm = volume(mid);
      if (vm == target) {
        lo = hi = mid;
        v_lo = v_hi = vm;
        break;
      }
      if (vm > target) {
        lo = mid;
        v_lo = vm;
      } else {
        hi = mid;
        v_hi = vm;
      }
    }
    r.multiplier = std::abs(v_lo - target) <= std::abs(v_hi - target) ? lo : hi;
  }
  state.multiplier = r.multiplier;
  state.theta = densities_for(state, r.multiplier, material);
  r.volume = volume_of(mesh, state.theta);
  r.feasible = std::abs(r.volume - target) <= tol * target;
  return r;
}

OptimizeResult optimize(std::shared_ptr<const Q2Space> space, const DesignProblem& problem,
                        const DesignState* init, const OptimizeOptions& options) {
  using Clock = std::chrono::steady_clock;
  const QuadMesh& mesh = space->mesh();
  const double target = problem.volume_fraction * mesh.area();
  DesignState state = init ? *init : initial_design(space, problem.volume_fraction);
  if (state.space != space) throw std::invalid_argument("optimize: design lives on another space");

  OptimizeResult best;
  LinearSolver solver(options.solver);
  const Assembler assembler(space);
  LinearSystem system;
  Eigen::VectorXd previous;
  double last = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    const auto start = Clock::now();
    const DesignTensors tensors(state, problem.material);
    assembler.assemble(tensors.field(), system);
    SolveReport report;
    DisplacementField u =
        solver.solve(space, system, &report, previous.size() ? &previous : nullptr);
    const double j = compliance(u);

    IterationRecord rec;
    rec.iteration = it;
    rec.compliance = j;
    rec.volume = volume_of(mesh, state.theta);
    rec.multiplier = state.multiplier;
    best.history.push_back(j);

    const bool done = it > 0 && std::abs(j - last) < options.tolerance * std::max(1.0, std::abs(j));
    if (it == 0 || j <= best.compliance || done) {
      best.u = u;
      best.state = state;
      best.compliance = j;
    }
    if (done) {
      best.converged = true;
      rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      best.log.push_back(rec);
      if (options.observer) options.observer(rec);
      break;
    }
    last = j;
    previous = u.values();
    if (it + 1 < options.max_iterations) {
      update_params(u, state.multiplier, tensors, problem.material, state);
      const MultiplierResult mr =
          adapt_multiplier(state, target, problem.material, options.volume_tolerance);
      best.feasible = best.feasible && mr.feasible;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    best.log.push_back(rec);
    if (options.observer) options.observer(rec);
  }
  return best;
}

}  // namespace lamopt
