#pragma once

// Continuous bi-quadratic (Q2) discretisation of plane linear elasticity with
// a tensor that may vary from quadrature point to quadrature point.
// Hanging nodes and Dirichlet values are condensed out of the linear system,
// which therefore stays symmetric positive definite.

#include "lamopt/quadmesh.hpp"
#include "lamopt/quadrature.hpp"

#include <Eigen/Core>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace lamopt {

/// Straight boundary segment from a to b (a == b selects a single point).
struct Segment {
  Eigen::Vector2d a;
  Eigen::Vector2d b;

  double length() const { return (b - a).norm(); }
  bool contains(const Eigen::Vector2d& p, double tol) const;
};

struct DirichletCondition {
  Segment where;
  std::array<bool, 2> fixed{true, true};
  /// Prescribed displacement; zero when empty.
  std::function<Eigen::Vector2d(const Eigen::Vector2d&)> value;
};

struct NeumannCondition {
  Segment where;
  Eigen::Vector2d traction{0, 0};  ///< force per length
};

struct BoundaryConditions {
  std::vector<DirichletCondition> dirichlet;
  std::vector<NeumannCondition> neumann;

  /// Throws if a Neumann segment overlaps a Dirichlet segment with positive
  /// length on a fixed component.
  void validate() const;
  Eigen::Vector2d traction_at(const Eigen::Vector2d& p, double tol) const;
  bool fixed_at(const Eigen::Vector2d& p, int component, double tol) const;
};

/// Voigt elasticity tensor at a local point of a cell.
using TensorField = std::function<Eigen::Matrix3d(Index cell, const Eigen::Vector2d& local)>;

TensorField constant_field(const Eigen::Matrix3d& c);

/// Piece of a boundary edge on which traction and fixity are constant.
struct BoundaryPiece {
  Index cell = -1;
  Side side = Side::Left;
  double t0 = 0;  ///< along the side, in [0, 1], increasing coordinate
  double t1 = 1;
  Eigen::Vector2d traction{0, 0};
  std::array<bool, 2> fixed{false, false};
};

/// Local point of a cell on a side at parameter t.
Eigen::Vector2d side_point(Side s, double t);

/// Per-dof representation: value = constant + sum weight * free[index].
struct DofExpansion {
  std::vector<std::pair<Index, double>> terms;
  double constant = 0;
};

class Q2Space {
 public:
  Q2Space(std::shared_ptr<const QuadMesh> mesh, BoundaryConditions bc, int points_per_direction = 3);

  const QuadMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const QuadMesh> mesh_ptr() const { return mesh_; }
  const BoundaryConditions& bc() const { return bc_; }
  const Rule2D& rule() const { return rule_; }
  const Rule1D& edge_rule() const { return edge_rule_; }

  /// dof = 2 * node + component.
  Index num_dofs() const { return 2 * mesh_->num_nodes(); }
  Index num_free() const { return num_free_; }
  const DofExpansion& expansion(Index dof) const { return expansions_[dof]; }
  bool is_dirichlet(Index dof) const { return dirichlet_[dof]; }

  /// Full-length Neumann load vector: entry dof = integral of g . phi_dof.
  const Eigen::VectorXd& neumann_load() const { return load_; }
  const std::vector<BoundaryPiece>& boundary_pieces() const { return pieces_; }

  /// Full coefficient vector from free values.
  Eigen::VectorXd expand(const Eigen::VectorXd& free_values) const;
  /// Free values from a full coefficient vector (injection).
  Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full) const;

  double geometric_tolerance() const { return 1e-9 * mesh_->root_size(); }

 private:
  std::shared_ptr<const QuadMesh> mesh_;
  BoundaryConditions bc_;
  Rule2D rule_;
  Rule1D edge_rule_;
  Index num_free_ = 0;
  std::vector<DofExpansion> expansions_;
  std::vector<bool> dirichlet_;
  std::vector<Index> free_of_dof_;
  Eigen::VectorXd load_;
  std::vector<BoundaryPiece> pieces_;
};

struct LinearSystem {
  Eigen::SparseMatrix<double> matrix;  ///< free x free, SPD
  Eigen::VectorXd rhs;
};

struct SolverOptions {
  enum class Method { Direct, ConjugateGradient };
  Method method = Method::Direct;
  /// Relative residual and iteration cap for conjugate gradients.
  double tolerance = 1e-10;
  int max_iterations = 100000;
  /// Direct method: a later system on the same space is first solved by
  /// conjugate gradients preconditioned with the last factorisation. A solve
  /// whose iterations cost more than `refresh_ratio` factorisations (by
  /// operation count) refreshes the factorisation for the next system; one
  /// that does not converge within twice the break-even count falls back to
  /// factorising.
  bool reuse_factorization = true;
  double reuse_tolerance = 1e-11;
  double refresh_ratio = 0.5;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0;
  bool converged = false;
  bool factorized = false;  ///< direct method: a new factorisation was computed
};

class DisplacementField {
 public:
  DisplacementField() = default;
  DisplacementField(std::shared_ptr<const Q2Space> space, Eigen::VectorXd values)
      : space_(std::move(space)), values_(std::move(values)) {}

  const Q2Space& space() const { return *space_; }
  std::shared_ptr<const Q2Space> space_ptr() const { return space_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  /// Columns are the nine nodal displacement vectors of a cell.
  Eigen::Matrix<double, 2, 9> cell_values(Index cell) const;
  Eigen::Vector2d value_at(Index cell, const Eigen::Vector2d& local) const;
  /// Row i, column j: d u_i / d x_j.
  Eigen::Matrix2d gradient_at(Index cell, const Eigen::Vector2d& local) const;
  Eigen::Matrix2d strain_at(Index cell, const Eigen::Vector2d& local) const;

 private:
  std::shared_ptr<const Q2Space> space_;
  Eigen::VectorXd values_;
};

/// 18 x 18 element stiffness of a cell (dof 2 k + c for node k).
Eigen::Matrix<double, 18, 18> element_stiffness(const Q2Space& space, Index cell,
                                                const TensorField& c);

/// Q2 shape values and physical gradients (rows: d/dx, d/dy) at a local point.
void q2_shape(const Eigen::Vector2d& local, double h, Eigen::Matrix<double, 1, 9>& values,
              Eigen::Matrix<double, 2, 9>& gradients);

LinearSystem assemble(const Q2Space& space, const TensorField& c);

/// Repeated assembly on one space: the sparsity pattern and the position of
/// every element contribution are computed once, later assemblies only write
/// values. Produces the same system as assemble().
class Assembler {
 public:
  explicit Assembler(std::shared_ptr<const Q2Space> space);

  /// Reuses the storage of `out` when it already holds this pattern.
  void assemble(const TensorField& c, LinearSystem& out) const;
  LinearSystem assemble(const TensorField& c) const;

 private:
  std::shared_ptr<const Q2Space> space_;
  Eigen::SparseMatrix<double> pattern_;
  /// Per cell, value positions of the (a, b, term_i, term_j) products in loop order.
  std::vector<std::int32_t> positions_;
  std::vector<std::size_t> cell_offsets_;
};

/// Solver for the condensed system. The direct method keeps the symbolic
/// factorisation while the sparsity pattern stays the same, which is the case
/// for repeated solves on one space with changing material.
class LinearSolver {
 public:
  explicit LinearSolver(SolverOptions options = {}) : options_(options) {}

  /// `guess` (full coefficient vector) warm-starts conjugate gradients.
  DisplacementField solve(std::shared_ptr<const Q2Space> space, const LinearSystem& system,
                          SolveReport* report = nullptr, const Eigen::VectorXd* guess = nullptr);

 private:
  struct FactorPreconditioner;

  SolverOptions options_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool factor_valid_ = false;
  double factor_flops_ = 0;     ///< operation count of one factorisation
  double iteration_flops_ = 0;  ///< of one preconditioned CG iteration

  void factorize(const Eigen::SparseMatrix<double>& matrix);
  std::shared_ptr<const Q2Space> analysed_for_;
  Index analysed_nonzeros_ = -1;
};

DisplacementField solve(std::shared_ptr<const Q2Space> space, const LinearSystem& system,
                        const SolverOptions& options = {}, SolveReport* report = nullptr,
                        const Eigen::VectorXd* guess = nullptr);

/// Work of the surface load, integral over the Neumann boundary of g . u.
double compliance(const DisplacementField& u);

/// a(u, u) = integral of C eps(u) : eps(u).
double energy(const DisplacementField& u, const TensorField& c);

Eigen::Matrix2d stress_at(const DisplacementField& u, const TensorField& c, Index cell,
                          const Eigen::Vector2d& local);

}  // namespace lamopt
