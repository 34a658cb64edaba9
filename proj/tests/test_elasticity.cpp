#include "doctest.h"

#include "lamopt/elasticity.hpp"
#include "lamopt/laminate.hpp"

#include <Eigen/Dense>

#include <random>

using namespace lamopt;

namespace {

const Eigen::Matrix3d kIsotropic = IsotropicMaterial<double>{1, 1}.tensor();

std::shared_ptr<const QuadMesh> random_mesh(unsigned seed, int steps) {
  auto mesh = std::make_shared<const QuadMesh>(uniform_mesh(Rect{}, 1));
  std::mt19937 rng(seed);
  for (int s = 0; s < steps; ++s) {
    std::vector<Index> marked;
    std::uniform_int_distribution<Index> pick(0, mesh->num_cells() - 1);
    for (int k = 0; k < 2; ++k) marked.push_back(pick(rng));
    mesh = std::make_shared<const QuadMesh>(mesh->refine(marked));
  }
  return mesh;
}

BoundaryConditions clamped_bottom_pulled_top(Eigen::Vector2d g) {
  BoundaryConditions bc;
  bc.dirichlet.push_back({Segment{{0, 0}, {1, 0}}, {true, true}, {}});
  bc.neumann.push_back({Segment{{0, 1}, {1, 1}}, g});
  return bc;
}

}  // namespace

TEST_CASE("zero data gives the zero solution") {
  auto mesh = random_mesh(1, 3);
  BoundaryConditions bc;
  bc.dirichlet.push_back({Segment{{0, 0}, {1, 0}}, {true, true}, {}});
  auto space = std::make_shared<const Q2Space>(mesh, bc);
  const LinearSystem sys = assemble(*space, constant_field(kIsotropic));
  SolveReport rep;
  const DisplacementField u = solve(space, sys, {}, &rep);
  CHECK(rep.converged);
  CHECK(u.values().isZero(0));
  CHECK(compliance(u) == 0);
}

TEST_CASE("condensed stiffness is symmetric") {
  auto mesh = random_mesh(2, 4);
  REQUIRE(mesh->num_hanging() > 0);
  auto space = std::make_shared<const Q2Space>(mesh, clamped_bottom_pulled_top({1, 0}));
  const LinearSystem sys = assemble(*space, constant_field(kIsotropic));
  const Eigen::SparseMatrix<double> t = sys.matrix.transpose();
  CHECK((sys.matrix - t).norm() <= 1e-13 * sys.matrix.norm());
}

TEST_CASE("patch test: affine displacement is reproduced on a mesh with hanging nodes") {
  auto mesh = random_mesh(3, 4);
  REQUIRE(mesh->num_hanging() > 0);
  Eigen::Matrix2d grad;
  grad << 0.3, -0.2, 0.7, 0.1;
  const Eigen::Vector2d shift(0.05, -0.4);
  auto affine = [&](const Eigen::Vector2d& x) -> Eigen::Vector2d { return shift + grad * x; };
  BoundaryConditions bc;
  const std::array<Eigen::Vector2d, 4> corners{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                                               Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 1)};
  for (int k = 0; k < 4; ++k)
    bc.dirichlet.push_back({Segment{corners[k], corners[(k + 1) % 4]}, {true, true}, affine});
  auto space = std::make_shared<const Q2Space>(mesh, bc);
  Eigen::Matrix3d c = IsotropicMaterial<double>{0.6, 1.4}.tensor();
  const LinearSystem sys = assemble(*space, constant_field(c));
  SolveReport rep;
  const DisplacementField u = solve(space, sys, {}, &rep);
  CHECK(rep.converged);
  double err = 0;
  for (Index n = 0; n < mesh->num_nodes(); ++n) {
    const Eigen::Vector2d want = affine(mesh->node(n));
    err = std::max(err, (Eigen::Vector2d(u.values()[2 * n], u.values()[2 * n + 1]) - want).norm());
  }
  CHECK(err <= 1e-10);
  for (Index cell = 0; cell < mesh->num_cells(); ++cell)
    CHECK((u.gradient_at(cell, {0.3, 0.8}) - grad).norm() <= 1e-9);
}

TEST_CASE("single element against a dense hand-assembled system") {
  auto mesh = std::make_shared<const QuadMesh>(uniform_mesh(Rect{}, 0));
  BoundaryConditions bc;
  bc.dirichlet.push_back({Segment{{0, 0}, {0, 1}}, {true, true}, {}});
  bc.neumann.push_back({Segment{{1, 0}, {1, 1}}, {0, -1}});
  auto space = std::make_shared<const Q2Space>(mesh, bc);
  REQUIRE(space->num_free() == 12);

  // Oracle: element stiffness restricted to the six nodes with x > 0, load from
  // the 1D quadratic basis integrals 1/6, 2/3, 1/6 along the right side.
  const auto ke = element_stiffness(*space, 0, constant_field(kIsotropic));
  const auto& nodes = mesh->cell_nodes(0);
  std::vector<int> keep;
  for (int k = 0; k < 9; ++k)
    if (k % 3 != 0) {
      keep.push_back(2 * k);
      keep.push_back(2 * k + 1);
    }
  Eigen::MatrixXd kd(12, 12);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(12);
  const double edge_weight[3] = {1.0 / 6, 2.0 / 3, 1.0 / 6};
  for (int a = 0; a < 12; ++a) {
    for (int b = 0; b < 12; ++b) kd(a, b) = ke(keep[a], keep[b]);
    const int k = keep[a] / 2;
    if (k % 3 == 2 && keep[a] % 2 == 1) f[a] = -edge_weight[k / 3];
  }
  const Eigen::VectorXd ud = kd.ldlt().solve(f);
  const double oracle = f.dot(ud);

  const DisplacementField u = solve(space, assemble(*space, constant_field(kIsotropic)));
  CHECK(compliance(u) == doctest::Approx(oracle).epsilon(1e-10));
  CHECK(compliance(u) > 0);
  for (int a = 0; a < 12; ++a)
    CHECK(u.values()[2 * nodes[keep[a] / 2] + keep[a] % 2] ==
          doctest::Approx(ud[a]).epsilon(1e-8).scale(1));
}

TEST_CASE("sparse solution agrees with a dense factorisation") {
  auto mesh = random_mesh(4, 3);
  auto space = std::make_shared<const Q2Space>(mesh, clamped_bottom_pulled_top({0.3, -1}));
  // spatially varying laminate tensor
  const IsotropicMaterial<double> mat{1, 1};
  TensorField c = [&](Index cell, const Eigen::Vector2d& local) {
    const Eigen::Vector2d x = mesh->to_global(cell, local);
    return Eigen::Matrix3d(effective_tensor(
        LaminateParams<double>{x.x() - x.y(), 0.2 + 0.6 * x.x(), 0.1 + 0.8 * x.y()}, mat));
  };
  const LinearSystem sys = assemble(*space, c);
  SolveReport rep;
  const DisplacementField u = solve(space, sys, {}, &rep);
  CHECK(rep.converged);
  const Eigen::VectorXd dense = Eigen::MatrixXd(sys.matrix).ldlt().solve(sys.rhs);
  const Eigen::VectorXd sparse = space->restrict_to_free(u.values());
  CHECK((sparse - dense).norm() <= 1e-8 * dense.norm());
  // Galerkin identity a(u, u) = F(u)
  CHECK(energy(u, c) == doctest::Approx(compliance(u)).epsilon(1e-8));

  // conjugate gradients reach the same answer, and a warm start from it is immediate
  SolverOptions cg_options;
  cg_options.method = SolverOptions::Method::ConjugateGradient;
  SolveReport cg_rep;
  const DisplacementField w = solve(space, sys, cg_options, &cg_rep);
  CHECK(cg_rep.converged);
  CHECK((w.values() - u.values()).norm() <= 1e-7 * u.values().norm());
  SolveReport warm;
  const DisplacementField v = solve(space, sys, cg_options, &warm, &u.values());
  CHECK(warm.iterations <= 1);
  CHECK((v.values() - u.values()).norm() <= 1e-8 * u.values().norm());

  // the cached symbolic factorisation is reused for a new material on the same space
  LinearSolver solver;
  const DisplacementField first = solver.solve(space, sys);
  const LinearSystem stiffer = assemble(*space, constant_field(kIsotropic));
  const DisplacementField second = solver.solve(space, stiffer);
  const DisplacementField fresh = solve(space, stiffer);
  CHECK((first.values() - u.values()).norm() <= 1e-12 * u.values().norm());
  CHECK((second.values() - fresh.values()).norm() <= 1e-12 * fresh.values().norm());
}

TEST_CASE("stress of a known displacement") {
  auto mesh = std::make_shared<const QuadMesh>(uniform_mesh(Rect{}, 2));
  auto space = std::make_shared<const Q2Space>(mesh, BoundaryConditions{});
  Eigen::VectorXd values(space->num_dofs());
  for (Index n = 0; n < mesh->num_nodes(); ++n) {
    values[2 * n] = mesh->node(n).x();
    values[2 * n + 1] = -mesh->node(n).y();
  }
  const DisplacementField u(space, values);
  const TensorField c = constant_field(kIsotropic);
  for (Index cell = 0; cell < mesh->num_cells(); ++cell) {
    const Eigen::Matrix2d s = stress_at(u, c, cell, {0.21, 0.67});
    CHECK(s(0, 0) == doctest::Approx(2));
    CHECK(s(1, 1) == doctest::Approx(-2));
    CHECK(std::abs(s(0, 1)) <= 1e-12);
  }
  CHECK(energy(u, c) == doctest::Approx(4.0));  // sigma : eps = 2 + 2 over unit area
}

TEST_CASE("uniform tension of a bar gives the constant stress solution") {
  // [0,2] x [0,1], left side fixed in x only, bottom-left corner pinned in y,
  // unit traction on the right side: sigma = diag(1, 0).
  auto mesh = std::make_shared<const QuadMesh>(uniform_mesh(Rect{{0, 0}, {2, 1}}, 2));
  BoundaryConditions bc;
  bc.dirichlet.push_back({Segment{{0, 0}, {0, 1}}, {true, false}, {}});
  bc.dirichlet.push_back({Segment{{0, 0}, {0, 0}}, {false, true}, {}});
  bc.neumann.push_back({Segment{{2, 0}, {2, 1}}, {1, 0}});
  auto space = std::make_shared<const Q2Space>(mesh, bc);
  const TensorField c = constant_field(kIsotropic);
  const DisplacementField u = solve(space, assemble(*space, c));
  for (Index cell = 0; cell < mesh->num_cells(); ++cell) {
    const Eigen::Matrix2d s = stress_at(u, c, cell, {0.5, 0.5});
    CHECK(s(0, 0) == doctest::Approx(1).epsilon(1e-9));
    CHECK(std::abs(s(1, 1)) <= 1e-9);
    CHECK(std::abs(s(0, 1)) <= 1e-9);
  }
  // plane strain with lambda = mu = 1: E' = 4 mu (lambda + mu) / (lambda + 2 mu) = 8/3,
  // compliance = |g| * elongation * height = 2 / E' = 3/4
  CHECK(compliance(u) == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("displacements are continuous across hanging edges") {
  auto mesh = random_mesh(9, 5);
  REQUIRE(mesh->num_hanging() > 0);
  auto space = std::make_shared<const Q2Space>(mesh, clamped_bottom_pulled_top({1, 1}));
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u01(-1, 1);
  Eigen::VectorXd free(space->num_free());
  for (Index i = 0; i < free.size(); ++i) free[i] = u01(rng);
  const DisplacementField u(space, space->expand(free));
  int checked = 0;
  for (Index cell = 0; cell < mesh->num_cells(); ++cell)
    for (Side s : kSides) {
      const Neighbors nb = mesh->neighbors(cell, s);
      if (nb.kind != Neighbors::Kind::Coarser) continue;
      for (double t : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        const Eigen::Vector2d x = mesh->to_global(cell, side_point(s, t));
        const Eigen::Vector2d a = u.value_at(cell, side_point(s, t));
        const Eigen::Vector2d b = u.value_at(nb.cells[0], mesh->to_local(nb.cells[0], x));
        CHECK((a - b).norm() <= 1e-12);
        ++checked;
      }
    }
  CHECK(checked > 0);
}

TEST_CASE("boundary validation") {
  BoundaryConditions bc;
  bc.dirichlet.push_back({Segment{{0, 0}, {1, 0}}, {true, true}, {}});
  bc.neumann.push_back({Segment{{0.5, 0}, {2, 0}}, {1, 0}});
  CHECK_THROWS_AS(bc.validate(), std::invalid_argument);
  bc.neumann[0].where = Segment{{1, 0}, {2, 0}};  // touches at a point only
  CHECK_NOTHROW(bc.validate());
  CHECK_THROWS_AS(Q2Space(std::make_shared<const QuadMesh>(uniform_mesh(Rect{}, 0)), {}, 2),
                  std::invalid_argument);
}
