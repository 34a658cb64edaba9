#include "lamopt/dwr.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>

namespace lamopt {

double ElementIndicators::total() const {
  double s = 0;
  for (double e : eta) s += e;
  return s;
}

Index ElementIndicators::fallback_count() const {
  return static_cast<Index>(std::count(fallback.begin(), fallback.end(), true));
}

namespace {

// Q2 basis values at the points of a rule, one row per point.
Eigen::MatrixXd q2_values(const Rule2D& rule) {
  Eigen::MatrixXd phi(rule.size(), 9);
  Eigen::Matrix<double, 1, 9> v;
  Eigen::Matrix<double, 2, 9> g;
  for (int q = 0; q < rule.size(); ++q) {
    q2_shape(rule.points[q], 1.0, v, g);
    phi.row(q) = v;
  }
  return phi;
}

const Rule2D& fine_rule() {
  static const Rule2D rule = tensor_rule(5);
  return rule;
}

const Rule1D& fine_edge_rule() {
  static const Rule1D rule = gauss_legendre(5);
  return rule;
}

}  // namespace

StressProjection::StressProjection(const DisplacementField& u, const TensorField& c)
    : space_(u.space_ptr()) {
  const QuadMesh& mesh = space_->mesh();
  const Rule2D& rule = space_->rule();
  const Eigen::MatrixXd fit =
      q2_values(rule).completeOrthogonalDecomposition().pseudoInverse();  // 9 x nq
  coefficients_.resize(static_cast<std::size_t>(mesh.num_cells()));
  Eigen::MatrixXd samples(rule.size(), 3);
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    for (int q = 0; q < rule.size(); ++q) {
      const Eigen::Matrix2d e = u.strain_at(cell, rule.points[q]);
      samples.row(q) = (c(cell, rule.points[q]) * Eigen::Vector3d(e(0, 0), e(1, 1), 2 * e(0, 1)))
                           .transpose();
    }
    coefficients_[cell] = (fit * samples).transpose();
  }
}

Eigen::Vector3d StressProjection::stress(Index cell, const Eigen::Vector2d& local) const {
  Eigen::Matrix<double, 1, 9> v;
  Eigen::Matrix<double, 2, 9> g;
  q2_shape(local, space_->mesh().cell_size(cell), v, g);
  return coefficients_[cell] * v.transpose();
}

Eigen::Vector2d StressProjection::divergence(Index cell, const Eigen::Vector2d& local) const {
  Eigen::Matrix<double, 1, 9> v;
  Eigen::Matrix<double, 2, 9> g;
  q2_shape(local, space_->mesh().cell_size(cell), v, g);
  const Eigen::Matrix<double, 3, 2> d = coefficients_[cell] * g.transpose();  // d s_i / d x_j
  return {d(0, 0) + d(2, 1), d(2, 0) + d(1, 1)};
}

Eigen::Vector2d StressProjection::traction(Index cell, const Eigen::Vector2d& local,
                                           const Eigen::Vector2d& normal) const {
  const Eigen::Vector3d s = stress(cell, local);
  return {s(0) * normal.x() + s(2) * normal.y(), s(2) * normal.x() + s(1) * normal.y()};
}

double cell_residual(const StressProjection& sigma, Index cell) {
  const double h = sigma.space().mesh().cell_size(cell);
  const Rule2D& rule = sigma.space().rule();
  double sum = 0;
  for (int q = 0; q < rule.size(); ++q)
    sum += rule.weights[q] * sigma.divergence(cell, rule.points[q]).squaredNorm();
  return std::sqrt(sum * h * h);
}

double edge_residual(const StressProjection& sigma, Index cell) {
  const Q2Space& space = sigma.space();
  const QuadMesh& mesh = space.mesh();
  const Rule1D& rule = space.edge_rule();
  const double h = mesh.cell_size(cell);
  double sum = 0;

  // integral over [t0, t1] of the side of |f(t)|^2
  auto integrate = [&](Side s, double t0, double t1, auto&& f) {
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const double t = t0 + (t1 - t0) * rule.points[q];
      sum += rule.weights[q] * (t1 - t0) * h * f(side_point(s, t)).squaredNorm();
    }
  };

  for (Side s : kSides) {
    const Eigen::Vector2d n = side_normal(s);
    const Neighbors nb = mesh.neighbors(cell, s);
    switch (nb.kind) {
      case Neighbors::Kind::Same:
      case Neighbors::Kind::Coarser: {
        const Index other = nb.cells[0];
        integrate(s, 0.0, 1.0, [&](const Eigen::Vector2d& local) -> Eigen::Vector2d {
          const Eigen::Vector2d y = mesh.to_local(other, mesh.to_global(cell, local));
          return 0.5 * (sigma.traction(cell, local, n) - sigma.traction(other, y, n));
        });
        break;
      }
      case Neighbors::Kind::Finer: {
        for (int k = 0; k < 2; ++k) {
          const Index other = nb.cells[k];
          integrate(s, 0.5 * k, 0.5 * (k + 1),
                    [&](const Eigen::Vector2d& local) -> Eigen::Vector2d {
                      const Eigen::Vector2d y = mesh.to_local(other, mesh.to_global(cell, local));
                      return 0.5 * (sigma.traction(cell, local, n) - sigma.traction(other, y, n));
                    });
        }
        break;
      }
      case Neighbors::Kind::Boundary:
        break;
    }
  }

  for (const BoundaryPiece& piece : space.boundary_pieces()) {
    if (piece.cell != cell) continue;
    if (piece.fixed[0] && piece.fixed[1]) continue;
    const Eigen::Vector2d n = side_normal(piece.side);
    integrate(piece.side, piece.t0, piece.t1, [&](const Eigen::Vector2d& local) {
      Eigen::Vector2d r = sigma.traction(cell, local, n) - piece.traction;
      for (int c = 0; c < 2; ++c)
        if (piece.fixed[c]) r[c] = 0;
      return r;
    });
  }
  return std::sqrt(sum);
}

std::array<double, 5> quartic_basis(double s) {
  std::array<double, 5> out{};
  for (int i = 0; i < 5; ++i) {
    double v = 1;
    for (int j = 0; j < 5; ++j)
      if (j != i) v *= (s - 0.25 * j) / (0.25 * (i - j));
    out[i] = v;
  }
  return out;
}

std::array<double, 5> quartic_basis_derivative(double s) {
  std::array<double, 5> out{};
  for (int i = 0; i < 5; ++i) {
    double d = 0;
    for (int k = 0; k < 5; ++k) {
      if (k == i) continue;
      double v = 1 / (0.25 * (i - k));
      for (int j = 0; j < 5; ++j)
        if (j != i && j != k) v *= (s - 0.25 * j) / (0.25 * (i - j));
      d += v;
    }
    out[i] = d;
  }
  return out;
}

Eigen::Vector2d PatchQuartic::value_at(const Eigen::Vector2d& x) const {
  const Eigen::Vector2d s = (x - patch.origin).cwiseQuotient(patch.size);
  const auto bx = quartic_basis(s.x()), by = quartic_basis(s.y());
  Eigen::Vector2d v = Eigen::Vector2d::Zero();
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) v += bx[i] * by[j] * values.col(i + 5 * j);
  return v;
}

Eigen::Matrix2d PatchQuartic::gradient_at(const Eigen::Vector2d& x) const {
  const Eigen::Vector2d s = (x - patch.origin).cwiseQuotient(patch.size);
  const auto bx = quartic_basis(s.x()), by = quartic_basis(s.y());
  const auto dx = quartic_basis_derivative(s.x()), dy = quartic_basis_derivative(s.y());
  Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) {
      g.col(0) += dx[i] * by[j] / patch.size.x() * values.col(i + 5 * j);
      g.col(1) += bx[i] * dy[j] / patch.size.y() * values.col(i + 5 * j);
    }
  return g;
}

PatchQuartic build_patch_quartic(const DisplacementField& u, const ElementPatch& patch) {
  PatchQuartic p;
  p.patch = patch;
  for (int e = 0; e < 4; ++e) {
    const Eigen::Matrix<double, 2, 9> v = u.cell_values(patch.elements[e]);
    const int ox = 2 * (e % 2), oy = 2 * (e / 2);
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) p.values.col((ox + a) + 5 * (oy + b)) = v.col(a + 3 * b);
  }
  return p;
}

Reconstruction::Reconstruction(const DisplacementField& u, Index cell)
    : mesh_(&u.space().mesh()), cell_(cell) {
  const QuadMesh& mesh = *mesh_;
  if (const auto patch = mesh.sibling_patch(cell)) {
    quartic_ = build_patch_quartic(u, *patch);
    return;
  }
  // nodes of the cell and of its edge neighbours
  std::map<Index, Eigen::Vector2d> nodes;
  auto add_cell = [&](Index c) {
    const Eigen::Matrix<double, 2, 9> v = u.cell_values(c);
    for (int k = 0; k < 9; ++k) nodes.emplace(mesh.cell_nodes(c)[k], v.col(k));
  };
  add_cell(cell);
  for (Side s : kSides)
    for (Index c : mesh.neighbors(cell, s).cells) add_cell(c);

  Eigen::MatrixXd a(static_cast<Index>(nodes.size()), 9);
  Eigen::MatrixXd b(static_cast<Index>(nodes.size()), 2);
  Eigen::Matrix<double, 1, 9> v;
  Eigen::Matrix<double, 2, 9> g;
  Index row = 0;
  for (const auto& [n, value] : nodes) {
    q2_shape(mesh.to_local(cell, mesh.node(n)), 1.0, v, g);
    a.row(row) = v;
    b.row(row) = value.transpose();
    ++row;
  }
  fit_ = a.colPivHouseholderQr().solve(b).transpose();
}

Eigen::Vector2d Reconstruction::value(const Eigen::Vector2d& local) const {
  if (quartic_) return quartic_->value_at(mesh_->to_global(cell_, local));
  Eigen::Matrix<double, 1, 9> v;
  Eigen::Matrix<double, 2, 9> g;
  q2_shape(local, mesh_->cell_size(cell_), v, g);
  return fit_ * v.transpose();
}

Eigen::Matrix2d Reconstruction::strain(const Eigen::Vector2d& local) const {
  Eigen::Matrix2d grad;
  if (quartic_) {
    grad = quartic_->gradient_at(mesh_->to_global(cell_, local));
  } else {
    Eigen::Matrix<double, 1, 9> v;
    Eigen::Matrix<double, 2, 9> g;
    q2_shape(local, mesh_->cell_size(cell_), v, g);
    grad = fit_ * g.transpose();
  }
  return 0.5 * (grad + grad.transpose());
}

PrimalWeights primal_weights(const DisplacementField& u, const Reconstruction& r, Index cell) {
  const double h = u.space().mesh().cell_size(cell);
  const Rule2D& rule = fine_rule();
  const Rule1D& edge = fine_edge_rule();
  PrimalWeights w;
  double sum = 0;
  for (int q = 0; q < rule.size(); ++q)
    sum += rule.weights[q] * (u.value_at(cell, rule.points[q]) - r.value(rule.points[q])).squaredNorm();
  w.cell = std::sqrt(sum * h * h);
  sum = 0;
  for (Side s : kSides)
    for (std::size_t q = 0; q < edge.points.size(); ++q) {
      const Eigen::Vector2d local = side_point(s, edge.points[q]);
      sum += edge.weights[q] * (u.value_at(cell, local) - r.value(local)).squaredNorm();
    }
  w.edge = std::sqrt(sum * h);
  return w;
}

ControlResiduals control_residuals(const DisplacementField& u, const DesignState& state,
                                   const IsotropicMaterial<double>& material, Index cell) {
  const double h = u.space().mesh().cell_size(cell);
  const Rule2D& rule = u.space().rule();
  ControlResiduals r;
  for (int q = 0; q < rule.size(); ++q) {
    const LaminateParams<double> p = state.params(cell, q);
    const auto [dm, dt] = tensor_derivatives(p, material);
    const Eigen::Vector3d e_ref =
        voigt_rotation(p.alpha).transpose() * to_voigt_strain<double>(u.strain_at(cell, rule.points[q]));
    r.m += rule.weights[q] * std::abs(e_ref.dot(dm * e_ref));
    r.theta += rule.weights[q] * std::abs(e_ref.dot(dt * e_ref));
  }
  r.m *= h * h;
  r.theta *= h * h;
  return r;
}

double recovered_ratio(const Eigen::Matrix2d& strain, const DesignState& state,
                       const IsotropicMaterial<double>& material, Index cell, int q) {
  const LaminateParams<double> p = state.params(cell, q);
  const auto rec = recover_params_newton<double>(strain, p.theta, p, material);
  if (rec.converged) return rec.m;
  const Eigen::Vector3d s = effective_tensor(p, material) * to_voigt_strain<double>(strain);
  return params_from_stress(from_voigt_stress<double>(s), 1.0, material).m;
}

double bilinear_density(const ElementPatch& patch, const std::vector<double>& theta,
                        const Eigen::Vector2d& x) {
  // element centres sit at patch coordinates 1/4 and 3/4
  const Eigen::Vector2d s = (x - patch.origin).cwiseQuotient(patch.size);
  const double tx = 2 * s.x() - 0.5, ty = 2 * s.y() - 0.5;
  const auto& e = patch.elements;
  return (1 - tx) * (1 - ty) * theta[e[0]] + tx * (1 - ty) * theta[e[1]] +
         (1 - tx) * ty * theta[e[2]] + tx * ty * theta[e[3]];
}

ControlWeights control_weights(const DisplacementField& u, const DesignState& state,
                               const IsotropicMaterial<double>& material,
                               const Reconstruction& r, Index cell) {
  const QuadMesh& mesh = u.space().mesh();
  const Rule2D& rule = u.space().rule();
  ControlWeights w;
  for (int q = 0; q < rule.size(); ++q) {
    const double m_u = recovered_ratio(u.strain_at(cell, rule.points[q]), state, material, cell, q);
    const double m_r = recovered_ratio(r.strain(rule.points[q]), state, material, cell, q);
    w.m = std::max(w.m, std::abs(m_u - m_r));
  }
  if (r.quartic()) {
    const double t = state.theta[cell];
    for (const Eigen::Vector2d corner : {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                         Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)})
      w.theta = std::max(w.theta, std::abs(t - bilinear_density(r.quartic()->patch, state.theta,
                                                                mesh.to_global(cell, corner))));
  }
  return w;
}

ElementIndicators indicators(const DisplacementField& u, const DesignState& state,
                             const IsotropicMaterial<double>& material) {
  const QuadMesh& mesh = u.space().mesh();
  const std::size_t n = static_cast<std::size_t>(mesh.num_cells());
  const DesignTensors tensors(state, material);
  const StressProjection sigma(u, tensors.field());
  ElementIndicators out;
  for (auto* v : {&out.rho_u_cell, &out.rho_u_edge, &out.rho_m, &out.rho_theta, &out.omega_u_cell,
                  &out.omega_u_edge, &out.omega_m, &out.omega_theta, &out.eta})
    v->assign(n, 0.0);
  out.fallback.assign(n, false);
  for (Index cell = 0; cell < mesh.num_cells(); ++cell) {
    const Reconstruction rec(u, cell);
    const PrimalWeights pw = primal_weights(u, rec, cell);
    const ControlResiduals cr = control_residuals(u, state, material, cell);
    const ControlWeights cw = control_weights(u, state, material, rec, cell);
    out.rho_u_cell[cell] = cell_residual(sigma, cell);
    out.rho_u_edge[cell] = edge_residual(sigma, cell);
    out.rho_m[cell] = cr.m;
    out.rho_theta[cell] = cr.theta;
    out.omega_u_cell[cell] = pw.cell;
    out.omega_u_edge[cell] = pw.edge;
    out.omega_m[cell] = cw.m;
    out.omega_theta[cell] = cw.theta;
    out.fallback[cell] = rec.fallback();
    out.eta[cell] = out.rho_u_cell[cell] * pw.cell + out.rho_u_edge[cell] * pw.edge +
                    0.5 * cr.m * cw.m + 0.5 * cr.theta * cw.theta;
  }
  return out;
}

}  // namespace lamopt
