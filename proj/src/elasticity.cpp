#include "lamopt/elasticity.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cstdint>
#include <cmath>
#include <map>
#include <stdexcept>

namespace lamopt {

bool Segment::contains(const Eigen::Vector2d& p, double tol) const {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  if (len2 == 0) return (p - a).norm() <= tol;
  const double t = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
  return (a + t * d - p).norm() <= tol;
}

namespace {

// Length of the common part of two segments if they are collinear, else 0.
double overlap_length(const Segment& s, const Segment& r, double tol) {
  if (s.length() == 0 || r.length() == 0) return 0;
  const Segment line{s.a - 1e6 * (s.b - s.a), s.b + 1e6 * (s.b - s.a)};
  if (!line.contains(r.a, tol) || !line.contains(r.b, tol)) return 0;
  const Eigen::Vector2d d = (s.b - s.a) / s.length();
  const double r0 = (r.a - s.a).dot(d), r1 = (r.b - s.a).dot(d);
  const double lo = std::max(0.0, std::min(r0, r1));
  const double hi = std::min(s.length(), std::max(r0, r1));
  return std::max(0.0, hi - lo);
}

}  // namespace

void BoundaryConditions::validate() const {
  for (const auto& n : neumann)
    for (const auto& d : dirichlet) {
      if (!d.fixed[0] && !d.fixed[1]) continue;
      const double scale = std::max(n.where.length(), 1.0);
      if (overlap_length(n.where, d.where, 1e-12 * scale) > 1e-12 * scale)
        throw std::invalid_argument("boundary conditions: Neumann and Dirichlet segments overlap");
    }
}

Eigen::Vector2d BoundaryConditions::traction_at(const Eigen::Vector2d& p, double tol) const {
  Eigen::Vector2d g = Eigen::Vector2d::Zero();
  for (const auto& n : neumann)
    if (n.where.contains(p, tol)) g += n.traction;
  return g;
}

bool BoundaryConditions::fixed_at(const Eigen::Vector2d& p, int component, double tol) const {
  for (const auto& d : dirichlet)
    if (d.fixed[component] && d.where.contains(p, tol)) return true;
  return false;
}

TensorField constant_field(const Eigen::Matrix3d& c) {
  return [c](Index, const Eigen::Vector2d&) { return c; };
}

Eigen::Vector2d side_point(Side s, double t) {
  switch (s) {
    case Side::Left: return {0, t};
    case Side::Right: return {1, t};
    case Side::Bottom: return {t, 0};
    case Side::Top: return {t, 1};
  }
  return {0, 0};
}

void q2_shape(const Eigen::Vector2d& local, double h, Eigen::Matrix<double, 1, 9>& values,
              Eigen::Matrix<double, 2, 9>& gradients) {
  const auto px = quadratic_basis(local.x()), py = quadratic_basis(local.y());
  const auto dx = quadratic_basis_derivative(local.x()), dy = quadratic_basis_derivative(local.y());
  for (int b = 0; b < 3; ++b)
    for (int a = 0; a < 3; ++a) {
      const int k = a + 3 * b;
      values(k) = px[a] * py[b];
      gradients(0, k) = dx[a] * py[b] / h;
      gradients(1, k) = px[a] * dy[b] / h;
    }
}

Q2Space::Q2Space(std::shared_ptr<const QuadMesh> mesh, BoundaryConditions bc,
                 int points_per_direction)
    : mesh_(std::move(mesh)),
      bc_(std::move(bc)),
      rule_(tensor_rule(points_per_direction)),
      edge_rule_(gauss_legendre(points_per_direction)) {
  if (points_per_direction < 3)
    throw std::invalid_argument("Q2Space: quadrature must integrate degree 5 (>= 3 points)");
  bc_.validate();
  const QuadMesh& m = *mesh_;
  const Index nn = m.num_nodes();
  const double tol = geometric_tolerance();

  dirichlet_.assign(2 * nn, false);
  std::vector<double> dirichlet_value(2 * nn, 0.0);
  for (Index n = 0; n < nn; ++n) {
    if (m.constraint_of(n) >= 0) continue;
    for (const auto& d : bc_.dirichlet) {
      if (!d.where.contains(m.node(n), tol)) continue;
      const Eigen::Vector2d v = d.value ? d.value(m.node(n)) : Eigen::Vector2d::Zero();
      for (int c = 0; c < 2; ++c)
        if (d.fixed[c]) {
          dirichlet_[2 * n + c] = true;
          dirichlet_value[2 * n + c] = v[c];
        }
    }
  }

  free_of_dof_.assign(2 * nn, -1);
  for (Index n = 0; n < nn; ++n) {
    if (m.constraint_of(n) >= 0) continue;
    for (int c = 0; c < 2; ++c)
      if (!dirichlet_[2 * n + c]) free_of_dof_[2 * n + c] = num_free_++;
  }

  // Hanging nodes resolve through their masters (recursively, although 2:1
  // balance keeps masters unconstrained).
  std::function<void(Index, double, std::map<Index, double>&)> resolve =
      [&](Index n, double w, std::map<Index, double>& acc) {
        const Index k = m.constraint_of(n);
        if (k < 0) {
          acc[n] += w;
          return;
        }
        const HangingConstraint& hc = m.constraints()[k];
        for (int i = 0; i < 3; ++i) resolve(hc.masters[i], w * hc.weights[i], acc);
      };

  expansions_.assign(2 * nn, {});
  for (Index n = 0; n < nn; ++n) {
    std::map<Index, double> masters;
    resolve(n, 1.0, masters);
    for (int c = 0; c < 2; ++c) {
      DofExpansion& e = expansions_[2 * n + c];
      for (const auto& [mn, w] : masters) {
        const Index dof = 2 * mn + c;
        if (dirichlet_[dof])
          e.constant += w * dirichlet_value[dof];
        else
          e.terms.emplace_back(free_of_dof_[dof], w);
      }
    }
  }

  // Boundary pieces split at segment end points.
  for (Index cell = 0; cell < m.num_cells(); ++cell) {
    for (Side s : kSides) {
      if (m.neighbors(cell, s).kind != Neighbors::Kind::Boundary) continue;
      const Eigen::Vector2d p0 = m.to_global(cell, side_point(s, 0));
      const Eigen::Vector2d p1 = m.to_global(cell, side_point(s, 1));
      const Segment edge{p0, p1};
      const double len = edge.length();
      std::vector<double> breaks{0.0, 1.0};
      auto add_break = [&](const Eigen::Vector2d& q) {
        if (!edge.contains(q, tol)) return;
        const double t = (q - p0).dot(p1 - p0) / (len * len);
        if (t > 1e-12 && t < 1 - 1e-12) breaks.push_back(t);
      };
      for (const auto& d : bc_.dirichlet) {
        add_break(d.where.a);
        add_break(d.where.b);
      }
      for (const auto& nm : bc_.neumann) {
        add_break(nm.where.a);
        add_break(nm.where.b);
      }
      std::sort(breaks.begin(), breaks.end());
      breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
      for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        BoundaryPiece piece;
        piece.cell = cell;
        piece.side = s;
        piece.t0 = breaks[k];
        piece.t1 = breaks[k + 1];
        const Eigen::Vector2d mid = p0 + 0.5 * (piece.t0 + piece.t1) * (p1 - p0);
        piece.traction = bc_.traction_at(mid, tol);
        piece.fixed = {bc_.fixed_at(mid, 0, tol), bc_.fixed_at(mid, 1, tol)};
        pieces_.push_back(piece);
      }
    }
  }

  load_ = Eigen::VectorXd::Zero(2 * nn);
  Eigen::Matrix<double, 1, 9> phi;
  Eigen::Matrix<double, 2, 9> grad;
  for (const BoundaryPiece& piece : pieces_) {
    if (piece.traction.isZero(0)) continue;
    const double h = m.cell_size(piece.cell);
    const double len = h * (piece.t1 - piece.t0);
    const auto& nodes = m.cell_nodes(piece.cell);
    for (std::size_t q = 0; q < edge_rule_.points.size(); ++q) {
      const double t = piece.t0 + (piece.t1 - piece.t0) * edge_rule_.points[q];
      q2_shape(side_point(piece.side, t), h, phi, grad);
      const double w = edge_rule_.weights[q] * len;
      for (int k = 0; k < 9; ++k)
        for (int c = 0; c < 2; ++c) load_[2 * nodes[k] + c] += w * phi(k) * piece.traction[c];
    }
  }
}

Eigen::VectorXd Q2Space::expand(const Eigen::VectorXd& free_values) const {
  Eigen::VectorXd full(num_dofs());
  for (Index d = 0; d < num_dofs(); ++d) {
    const DofExpansion& e = expansions_[d];
    double v = e.constant;
    for (const auto& [i, w] : e.terms) v += w * free_values[i];
    full[d] = v;
  }
  return full;
}

Eigen::VectorXd Q2Space::restrict_to_free(const Eigen::VectorXd& full) const {
  Eigen::VectorXd out(num_free_);
  for (Index d = 0; d < num_dofs(); ++d)
    if (free_of_dof_[d] >= 0) out[free_of_dof_[d]] = full[d];
  return out;
}

Eigen::Matrix<double, 2, 9> DisplacementField::cell_values(Index cell) const {
  const auto& nodes = space_->mesh().cell_nodes(cell);
  Eigen::Matrix<double, 2, 9> v;
  for (int k = 0; k < 9; ++k) {
    v(0, k) = values_[2 * nodes[k]];
    v(1, k) = values_[2 * nodes[k] + 1];
  }
  return v;
}

Eigen::Vector2d DisplacementField::value_at(Index cell, const Eigen::Vector2d& local) const {
  Eigen::Matrix<double, 1, 9> phi;
  Eigen::Matrix<double, 2, 9> grad;
  q2_shape(local, space_->mesh().cell_size(cell), phi, grad);
  return cell_values(cell) * phi.transpose();
}

Eigen::Matrix2d DisplacementField::gradient_at(Index cell, const Eigen::Vector2d& local) const {
  Eigen::Matrix<double, 1, 9> phi;
  Eigen::Matrix<double, 2, 9> grad;
  q2_shape(local, space_->mesh().cell_size(cell), phi, grad);
  return cell_values(cell) * grad.transpose();
}

Eigen::Matrix2d DisplacementField::strain_at(Index cell, const Eigen::Vector2d& local) const {
  const Eigen::Matrix2d g = gradient_at(cell, local);
  return 0.5 * (g + g.transpose());
}

Eigen::Matrix<double, 18, 18> element_stiffness(const Q2Space& space, Index cell,
                                                const TensorField& c) {
  const double h = space.mesh().cell_size(cell);
  const Rule2D& rule = space.rule();
  Eigen::Matrix<double, 18, 18> ke = Eigen::Matrix<double, 18, 18>::Zero();
  Eigen::Matrix<double, 1, 9> phi;
  Eigen::Matrix<double, 2, 9> grad;
  Eigen::Matrix<double, 3, 18> b = Eigen::Matrix<double, 3, 18>::Zero();
  for (int q = 0; q < rule.size(); ++q) {
    q2_shape(rule.points[q], h, phi, grad);
    for (int k = 0; k < 9; ++k) {
      b(0, 2 * k) = grad(0, k);
      b(1, 2 * k + 1) = grad(1, k);
      b(2, 2 * k) = grad(1, k);
      b(2, 2 * k + 1) = grad(0, k);
    }
    const Eigen::Matrix3d cq = c(cell, rule.points[q]);
    ke.noalias() += (rule.weights[q] * h * h) * b.transpose() * cq * b;
  }
  return ke;
}

LinearSystem assemble(const Q2Space& space, const TensorField& c) {
  const QuadMesh& mesh = space.mesh();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(mesh.num_cells()) * 18 * 18);
  LinearSystem sys;
  sys.rhs = Eigen::VectorXd::Zero(space.num_free());

  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    const auto ke = element_stiffness(space, cell, c);
    const auto& nodes = mesh.cell_nodes(cell);
    std::array<const DofExpansion*, 18> exp;
    for (int k = 0; k < 9; ++k)
      for (int d = 0; d < 2; ++d) exp[2 * k + d] = &space.expansion(2 * nodes[k] + d);
    for (int a = 0; a < 18; ++a) {
      for (int b = 0; b < 18; ++b) {
        const double kab = ke(a, b);
        for (const auto& [i, wi] : exp[a]->terms) {
          for (const auto& [j, wj] : exp[b]->terms) triplets.emplace_back(i, j, wi * wj * kab);
          if (exp[b]->constant != 0) sys.rhs[i] -= wi * kab * exp[b]->constant;
        }
      }
    }
  }

  const Eigen::VectorXd& load = space.neumann_load();
  for (Index d = 0; d < space.num_dofs(); ++d) {
    if (load[d] == 0) continue;
    for (const auto& [i, w] : space.expansion(d).terms) sys.rhs[i] += w * load[d];
  }

  sys.matrix.resize(space.num_free(), space.num_free());
  sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return sys;
}

// Eigen preconditioner interface around an existing factorisation.
struct LinearSolver::FactorPreconditioner {
  const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>* factor = nullptr;

  FactorPreconditioner() = default;
  template <typename M> explicit FactorPreconditioner(const M&) {}
  template <typename M> FactorPreconditioner& analyzePattern(const M&) { return *this; }
  template <typename M> FactorPreconditioner& factorize(const M&) { return *this; }
  template <typename M> FactorPreconditioner& compute(const M&) { return *this; }
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const { return factor->solve(b); }
  Eigen::ComputationInfo info() const { return Eigen::Success; }
};

void LinearSolver::factorize(const Eigen::SparseMatrix<double>& matrix) {
  ldlt_.factorize(matrix);
  factor_valid_ = ldlt_.info() == Eigen::Success;
  if (!factor_valid_) return;
  const auto& l = ldlt_.matrixL().nestedExpression();
  factor_flops_ = 0;
  for (Index j = 0; j < l.outerSize(); ++j) {
    const double c = static_cast<double>(l.outerIndexPtr()[j + 1] - l.outerIndexPtr()[j]);
    factor_flops_ += c * c;
  }
  iteration_flops_ = 4.0 * static_cast<double>(l.nonZeros()) +
                     2.0 * static_cast<double>(matrix.nonZeros()) + 10.0 * matrix.rows();
}

Assembler::Assembler(std::shared_ptr<const Q2Space> space) : space_(std::move(space)) {
  const Q2Space& sp = *space_;
  const QuadMesh& mesh = sp.mesh();
  std::vector<Eigen::Triplet<double>> triplets;
  auto for_each_product = [&](Index cell, auto&& visit) {
    const auto& nodes = mesh.cell_nodes(cell);
    for (int a = 0; a < 18; ++a) {
      const DofExpansion& ea = sp.expansion(2 * nodes[a / 2] + a % 2);
      for (int b = 0; b < 18; ++b) {
        const DofExpansion& eb = sp.expansion(2 * nodes[b / 2] + b % 2);
        for (const auto& ti : ea.terms)
          for (const auto& tj : eb.terms) visit(ti.first, tj.first);
      }
    }
  };
  for (Index cell = 0; cell < mesh.num_cells(); ++cell)
    for_each_product(cell, [&](Index i, Index j) { triplets.emplace_back(i, j, 0.0); });
  pattern_.resize(sp.num_free(), sp.num_free());
  pattern_.setFromTriplets(triplets.begin(), triplets.end());
  pattern_.makeCompressed();
  triplets.clear();
  triplets.shrink_to_fit();

  const auto* outer = pattern_.outerIndexPtr();
  const auto* inner = pattern_.innerIndexPtr();
  cell_offsets_.assign(static_cast<std::size_t>(mesh.num_cells()) + 1, 0);
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    for_each_product(cell, [&](Index i, Index j) {
      // column-major: column j, row i
      const auto* lo = inner + outer[j];
      const auto* hi = inner + outer[j + 1];
      const auto* it = std::lower_bound(lo, hi, static_cast<int>(i));
      positions_.push_back(static_cast<std::int32_t>(it - inner));
    });
    cell_offsets_[static_cast<std::size_t>(cell) + 1] = positions_.size();
  }
}

void Assembler::assemble(const TensorField& c, LinearSystem& out) const {
  const Q2Space& sp = *space_;
  const QuadMesh& mesh = sp.mesh();
  const bool reuse = out.matrix.rows() == pattern_.rows() && out.matrix.cols() == pattern_.cols() &&
                     out.matrix.nonZeros() == pattern_.nonZeros() && out.matrix.isCompressed();
  if (!reuse) out.matrix = pattern_;
  double* values = out.matrix.valuePtr();
  std::fill(values, values + out.matrix.nonZeros(), 0.0);
  out.rhs = Eigen::VectorXd::Zero(sp.num_free());

  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    const auto ke = element_stiffness(sp, cell, c);
    const auto& nodes = mesh.cell_nodes(cell);
    std::array<const DofExpansion*, 18> exp;
    for (int k = 0; k < 18; ++k) exp[k] = &sp.expansion(2 * nodes[k / 2] + k % 2);
    const std::int32_t* pos = positions_.data() + cell_offsets_[static_cast<std::size_t>(cell)];
    for (int a = 0; a < 18; ++a)
      for (int b = 0; b < 18; ++b) {
        const double kab = ke(a, b);
        for (const auto& [i, wi] : exp[a]->terms) {
          for (const auto& [j, wj] : exp[b]->terms) values[*pos++] += wi * wj * kab;
          if (exp[b]->constant != 0) out.rhs[i] -= wi * kab * exp[b]->constant;
        }
      }
  }

  const Eigen::VectorXd& load = sp.neumann_load();
  for (Index d = 0; d < sp.num_dofs(); ++d) {
    if (load[d] == 0) continue;
    for (const auto& [i, w] : sp.expansion(d).terms) out.rhs[i] += w * load[d];
  }
}

LinearSystem Assembler::assemble(const TensorField& c) const {
  LinearSystem out;
  assemble(c, out);
  return out;
}

DisplacementField LinearSolver::solve(std::shared_ptr<const Q2Space> space,
                                      const LinearSystem& system, SolveReport* report,
                                      const Eigen::VectorXd* guess) {
  SolveReport rep;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(space->num_free());
  const bool have_guess = guess && guess->size() == space->num_dofs();
  if (space->num_free() == 0 || system.rhs.norm() == 0) {
    rep.converged = true;
  } else if (options_.method == SolverOptions::Method::Direct) {
    const bool same_pattern =
        analysed_for_ == space && analysed_nonzeros_ == system.matrix.nonZeros();
    if (same_pattern && factor_valid_ && options_.reuse_factorization) {
      const double break_even = options_.refresh_ratio * factor_flops_ / iteration_flops_;
      Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                               FactorPreconditioner>
          cg;
      cg.setTolerance(options_.reuse_tolerance);
      cg.setMaxIterations(std::max(2, static_cast<int>(2 * break_even)));
      cg.compute(system.matrix);
      cg.preconditioner().factor = &ldlt_;
      x = have_guess ? Eigen::VectorXd(cg.solveWithGuess(system.rhs,
                                                          space->restrict_to_free(*guess)))
                     : Eigen::VectorXd(cg.solve(system.rhs));
      rep.iterations = static_cast<int>(cg.iterations());
      rep.relative_residual = cg.error();
      rep.converged = cg.info() == Eigen::Success;
      if (rep.converged && rep.iterations > break_even) {
        factorize(system.matrix);
        rep.factorized = true;
      }
    }
    if (!rep.converged) {
      if (!same_pattern) {
        ldlt_.analyzePattern(system.matrix);
        analysed_for_ = space;
        analysed_nonzeros_ = system.matrix.nonZeros();
      }
      factorize(system.matrix);
      rep.factorized = true;
      rep.iterations = 0;
      if (factor_valid_) {
        x = ldlt_.solve(system.rhs);
        rep.relative_residual = (system.matrix * x - system.rhs).norm() / system.rhs.norm();
        rep.converged = ldlt_.info() == Eigen::Success;
      }
    }
  } else {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(options_.tolerance);
    cg.setMaxIterations(options_.max_iterations);
    cg.compute(system.matrix);
    if (have_guess)
      x = cg.solveWithGuess(system.rhs, space->restrict_to_free(*guess));
    else
      x = cg.solve(system.rhs);
    rep.iterations = static_cast<int>(cg.iterations());
    rep.relative_residual = cg.error();
    rep.converged = cg.info() == Eigen::Success;
  }
  if (report) *report = rep;
  Eigen::VectorXd full = space->expand(x);
  return DisplacementField(std::move(space), std::move(full));
}

DisplacementField solve(std::shared_ptr<const Q2Space> space, const LinearSystem& system,
                        const SolverOptions& options, SolveReport* report,
                        const Eigen::VectorXd* guess) {
  LinearSolver solver(options);
  return solver.solve(std::move(space), system, report, guess);
}

double compliance(const DisplacementField& u) {
  return u.space().neumann_load().dot(u.values());
}

double energy(const DisplacementField& u, const TensorField& c) {
  const Q2Space& space = u.space();
  const QuadMesh& mesh = space.mesh();
  const Rule2D& rule = space.rule();
  double e = 0;
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    const double h = mesh.cell_size(cell);
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d eps = u.strain_at(cell, rule.points[q]);
      const Eigen::Vector3d ev(eps(0, 0), eps(1, 1), 2 * eps(0, 1));
      e += rule.weights[q] * h * h * ev.dot(c(cell, rule.points[q]) * ev);
    }
  }
  return e;
}

Eigen::Matrix2d stress_at(const DisplacementField& u, const TensorField& c, Index cell,
                          const Eigen::Vector2d& local) {
  const Eigen::Matrix2d eps = u.strain_at(cell, local);
  const Eigen::Vector3d ev(eps(0, 0), eps(1, 1), 2 * eps(0, 1));
  const Eigen::Vector3d s = c(cell, local) * ev;
  Eigen::Matrix2d sigma;
  sigma << s(0), s(2), s(2), s(1);
  return sigma;
}

}  // namespace lamopt
