#include "lamopt/scenarios.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lamopt {

std::shared_ptr<const QuadMesh> Scenario::mesh(int level) const {
  return std::make_shared<const QuadMesh>(origin, root_size, nx, ny, active, level);
}

const std::vector<std::string>& builtin_scenario_names() {
  static const std::vector<std::string> names{"carrier-plate", "cantilever", "bridge", "l-shape"};
  return names;
}

Scenario builtin_scenario(const std::string& name, const ScenarioOverrides& o) {
  const double w = o.strip_fraction;
  if (!(w > 0 && w < 1)) throw std::invalid_argument("strip fraction must lie in (0, 1)");
  Scenario s;
  s.name = name;
  s.load = o.load.value_or(1.0);
  s.material = {o.lame_lambda.value_or(1.0), o.lame_mu.value_or(1.0)};
  const double g = s.load;
  using V = Eigen::Vector2d;

  if (name == "carrier-plate") {
    // clamped at the bottom, sheared along the whole top edge
    s.volume_fraction = 0.33;
    s.bc.dirichlet.push_back({Segment{V(0, 0), V(1, 0)}, {true, true}, {}});
    s.bc.neumann.push_back({Segment{V(0, 1), V(1, 1)}, V(g, 0)});
  } else if (name == "cantilever") {
    s.volume_fraction = 0.5;
    s.nx = 2;
    s.active.assign(2, true);
    s.bc.dirichlet.push_back({Segment{V(0, 0), V(0, 1)}, {true, true}, {}});
    s.bc.neumann.push_back({Segment{V(2, 0.5 - w / 2), V(2, 0.5 + w / 2)}, V(0, -g)});
  } else if (name == "bridge") {
    // rollers on strips at both lower corners, lower-left node pinned,
    // the bottom in between loaded downwards
    s.volume_fraction = 0.33;
    s.nx = 2;
    s.active.assign(2, true);
    const double strip = 2 * w;
    s.bc.dirichlet.push_back({Segment{V(0, 0), V(strip, 0)}, {false, true}, {}});
    s.bc.dirichlet.push_back({Segment{V(2 - strip, 0), V(2, 0)}, {false, true}, {}});
    s.bc.dirichlet.push_back({Segment{V(0, 0), V(0, 0)}, {true, true}, {}});
    s.bc.neumann.push_back({Segment{V(strip, 0), V(2 - strip, 0)}, V(0, -g)});
  } else if (name == "l-shape") {
    // [0,2]^2 without the lower-right quadrant; clamped at the bottom, loaded
    // downwards at the centre of the right-hand side
    s.volume_fraction = 0.33;
    s.nx = s.ny = 2;
    s.active = {true, false, true, true};
    s.bc.dirichlet.push_back({Segment{V(0, 0), V(1, 0)}, {true, true}, {}});
    s.bc.neumann.push_back({Segment{V(2, 1.5 - w / 2), V(2, 1.5 + w / 2)}, V(0, -g)});
  } else {
    throw std::invalid_argument("unknown scenario '" + name + "'");
  }
  if (o.volume_fraction) s.volume_fraction = *o.volume_fraction;
  if (!(s.volume_fraction > 0 && s.volume_fraction <= 1))
    throw std::invalid_argument("volume fraction must lie in (0, 1]");
  if (!(s.material.mu > 0 && s.material.lam + s.material.mu > 0))
    throw std::invalid_argument("Lame constants must satisfy mu > 0 and lambda + mu > 0");
  s.bc.validate();
  return s;
}

namespace {

struct LinearFit {
  double j_star = 0, c = 0, ss = 0;
};

LinearFit fit_for_rate(const std::vector<std::pair<double, double>>& data, double p) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1;
    a(i, 1) = std::pow(data[i].first, p);
    b[i] = data[i].second;
  }
  const Eigen::Vector2d x = a.colPivHouseholderQr().solve(b);
  return {x[0], x[1], (a * x - b).squaredNorm()};
}

}  // namespace

FitResult fit_extrapolation(const std::vector<std::pair<double, double>>& data) {
  if (data.size() < 3) throw std::invalid_argument("fit_extrapolation: need at least 3 points");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!(data[i].first > 0)) throw std::invalid_argument("fit_extrapolation: h must be positive");
    for (std::size_t k = 0; k < i; ++k)
      if (data[k].first == data[i].first)
        throw std::invalid_argument("fit_extrapolation: duplicate h");
  }
  double scale = 0, lo = INFINITY, hi = -INFINITY;
  for (const auto& [h, j] : data) {
    scale = std::max(scale, std::abs(j));
    lo = std::min(lo, j);
    hi = std::max(hi, j);
  }

  FitResult r;
  if (hi - lo <= 1e-14 * std::max(scale, 1.0)) {
    const LinearFit f = fit_for_rate(data, 1.0);
    r.j_star = f.j_star;
    r.c = 0;
    r.p = 1;
    r.residual = std::sqrt(f.ss);
    r.converged = true;
    r.rate_identified = false;
    return r;
  }

  // the profiled residual can have several local minima; scan first
  constexpr double p_min = 0.1, p_max = 4.0;
  constexpr int grid = 391;
  auto ss = [&](double p) { return fit_for_rate(data, p).ss; };
  int best = 0;
  double best_ss = INFINITY;
  for (int k = 0; k < grid; ++k) {
    const double v = ss(p_min + (p_max - p_min) * k / (grid - 1));
    if (v < best_ss) best_ss = v, best = k;
  }
  const double step = (p_max - p_min) / (grid - 1);
  double a = std::max(p_min, p_min + (best - 1) * step);
  double b = std::min(p_max, p_min + (best + 1) * step);
  const double phi = (std::sqrt(5.0) - 1) / 2;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = ss(x1), f2 = ss(x2);
  for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
    if (f1 <= f2) {
      b = x2, x2 = x1, f2 = f1;
      x1 = b - phi * (b - a);
      f1 = ss(x1);
    } else {
      a = x1, x1 = x2, f1 = f2;
      x2 = a + phi * (b - a);
      f2 = ss(x2);
    }
  }
  double p = f1 <= f2 ? x1 : x2;
  LinearFit lf = fit_for_rate(data, p);
  Eigen::Vector3d x(lf.j_star, lf.c, p);
  double current = lf.ss;

  // Gauss-Newton polish on (J*, c, p)
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  bool converged = false;
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd jac(n, 3);
    Eigen::VectorXd res(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = data[i].first, hp = std::pow(h, x[2]);
      res[i] = x[0] + x[1] * hp - data[i].second;
      jac(i, 0) = 1;
      jac(i, 1) = hp;
      jac(i, 2) = x[1] * hp * std::log(h);
    }
    const Eigen::Vector3d dx = jac.colPivHouseholderQr().solve(-res);
    double t = 1;
    bool accepted = false;
    for (int k = 0; k < 30; ++k, t /= 2) {
      const Eigen::Vector3d y = x + t * dx;
      if (!(y[2] > 0)) continue;
      double s = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e = y[0] + y[1] * std::pow(data[i].first, y[2]) - data[i].second;
        s += e * e;
      }
      if (s <= current) {
        accepted = true;
        const double moved = (t * dx).cwiseAbs().maxCoeff();
        x = y;
        current = s;
        if (moved <= 1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff())) converged = true;
        break;
      }
    }
    if (!accepted || converged) {
      converged = true;
      break;
    }
  }
  r.j_star = x[0];
  r.c = x[1];
  r.p = x[2];
  r.residual = std::sqrt(current);
  r.converged = converged && p_min <= r.p && r.p <= p_max;
  r.rate_identified = std::abs(r.c) > 1e-12 * std::max(scale, 1.0);
  return r;
}

std::vector<UniformLevel> uniform_study(const Scenario& scenario, int first, int last,
                                        const UniformOptions& options) {
  if (first < 0 || last < first) throw std::invalid_argument("uniform_study: bad level range");
  using Clock = std::chrono::steady_clock;
  const DesignProblem problem = scenario.problem();
  std::vector<UniformLevel> out;
  std::optional<DesignState> previous;
  for (int level = first; level <= last; ++level) {
    const auto start = Clock::now();
    auto space = std::make_shared<const Q2Space>(scenario.mesh(level), scenario.bc);
    std::optional<DesignState> init;
    if (options.nested && previous) init = transfer_design(*previous, space);
    const OptimizeResult result =
        optimize(space, problem, init ? &*init : nullptr, options.optimize);
    std::optional<ElementIndicators> ind;
    if (options.estimate) ind = indicators(result.u, result.state, problem.material);

    UniformLevel u;
    u.level = level;
    u.h = scenario.mesh_size(level);
    AdaptiveStep& rec = u.record;
    rec.step = level - first;
    rec.elements = space->mesh().num_cells();
    rec.dofs = space->num_free();
    rec.compliance = result.compliance;
    rec.eta_sum = ind ? ind->total() : std::numeric_limits<double>::quiet_NaN();
    rec.volume = volume_of(space->mesh(), result.state.theta);
    rec.multiplier = result.state.multiplier;
    rec.iterations = static_cast<int>(result.history.size());
    rec.converged = result.converged;
    rec.feasible = result.feasible;
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out.push_back(u);
    if (options.observer) options.observer(out.back(), result, ind ? &*ind : nullptr);
    previous = result.state;
  }
  return out;
}

}  // namespace lamopt
