#include "doctest.h"

#include "lamopt/quadmesh.hpp"
#include "lamopt/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace lamopt;

namespace {

void check_balance(const QuadMesh& mesh) {
  for (Index c = 0; c < mesh.num_cells(); ++c)
    for (Side s : kSides) {
      const Neighbors nb = mesh.neighbors(c, s);  // throws on a violation
      for (Index n : nb.cells) CHECK(std::abs(mesh.cell(n).level - mesh.cell(c).level) <= 1);
    }
}

// Tiling check on a fine sample grid: every sample point lies in exactly one leaf.
void check_tiling(const QuadMesh& mesh, int samples) {
  const Rect b = mesh.bounds();
  for (int j = 0; j < samples; ++j)
    for (int i = 0; i < samples; ++i) {
      const Eigen::Vector2d p = b.lower + Eigen::Vector2d((i + 0.5) / samples * b.width(),
                                                          (j + 0.5) / samples * b.height());
      int hits = 0;
      for (Index c = 0; c < mesh.num_cells(); ++c) {
        const Eigen::Vector2d l = mesh.to_local(c, p);
        if (l.x() >= 0 && l.x() < 1 && l.y() >= 0 && l.y() < 1) ++hits;
      }
      const std::int64_t ri = static_cast<std::int64_t>((p.x() - b.lower.x()) / mesh.root_size());
      const std::int64_t rj = static_cast<std::int64_t>((p.y() - b.lower.y()) / mesh.root_size());
      CHECK(hits == (mesh.root_active(ri, rj) ? 1 : 0));
    }
}

void check_constraints(const QuadMesh& mesh) {
  for (const HangingConstraint& hc : mesh.constraints()) {
    CHECK(hc.weights[0] + hc.weights[1] + hc.weights[2] == doctest::Approx(1.0).epsilon(1e-14));
    for (Index m : hc.masters) CHECK(mesh.constraint_of(m) < 0);
    // weights are the coarse edge's quadratic basis at the node's parameter
    const Eigen::Vector2d a = mesh.node(hc.masters[0]), b = mesh.node(hc.masters[2]);
    const double t = (mesh.node(hc.node) - a).norm() / (b - a).norm();
    const auto w = quadratic_basis(t);
    for (int k = 0; k < 3; ++k) CHECK(hc.weights[k] == doctest::Approx(w[k]).epsilon(1e-14));
    CHECK((mesh.node(hc.masters[1]) - 0.5 * (a + b)).norm() < 1e-14);
  }
}

}  // namespace

TEST_CASE("uniform meshes") {
  const Rect unit{{0, 0}, {1, 1}};
  const QuadMesh m0 = uniform_mesh(unit, 0);
  CHECK(m0.num_cells() == 1);
  CHECK(m0.num_hanging() == 0);
  CHECK(m0.num_nodes() == 9);

  const QuadMesh m2 = uniform_mesh(unit, 2);
  CHECK(m2.num_cells() == 16);
  for (Index c = 0; c < m2.num_cells(); ++c) CHECK(m2.cell_size(c) == 0.25);
  CHECK(m2.num_nodes() == 81);

  const QuadMesh wide = uniform_mesh({{0, 0}, {2, 1}}, 3);
  CHECK(wide.num_cells() == 128);
  CHECK(wide.roots_x() == 2);
  for (Index c = 0; c < wide.num_cells(); ++c) CHECK(wide.cell_size(c) == 0.125);
  CHECK(wide.area() == doctest::Approx(2.0));

  CHECK_THROWS(uniform_mesh({{0, 0}, {1.5, 1}}, 1));
}

TEST_CASE("refining one cell of a level-1 mesh") {
  const QuadMesh m1 = uniform_mesh({{0, 0}, {1, 1}}, 1);
  const Index lower_left = *m1.find({1, 0, 0});
  const std::array<Index, 1> mark{lower_left};
  const QuadMesh r = m1.refine(mark);
  CHECK(r.num_cells() == 7);
  // two interior edges x = 1/2 (y < 1/2) and y = 1/2 (x < 1/2), two hanging nodes each
  CHECK(r.num_hanging() == 4);
  for (const HangingConstraint& hc : r.constraints()) {
    const Eigen::Vector2d p = r.node(hc.node);
    const bool on_vertical = std::abs(p.x() - 0.5) < 1e-14 && p.y() < 0.5;
    const bool on_horizontal = std::abs(p.y() - 0.5) < 1e-14 && p.x() < 0.5;
    CHECK((on_vertical || on_horizontal));
  }
  check_constraints(r);
  check_balance(r);
}

TEST_CASE("empty marking and full marking") {
  const QuadMesh m = uniform_mesh({{0, 0}, {1, 1}}, 2);
  const QuadMesh same = m.refine({});
  CHECK(same.num_cells() == m.num_cells());
  for (Index c = 0; c < m.num_cells(); ++c) CHECK(same.cell(c) == m.cell(c));

  std::vector<Index> all(m.num_cells());
  for (Index c = 0; c < m.num_cells(); ++c) all[c] = c;
  const QuadMesh finer = m.refine(all);
  const QuadMesh ref = uniform_mesh({{0, 0}, {1, 1}}, 3);
  CHECK(finer.num_cells() == 64);
  CHECK(finer.num_hanging() == 0);
  CHECK(finer.num_nodes() == ref.num_nodes());
}

TEST_CASE("sibling patches") {
  const QuadMesh m2 = uniform_mesh({{0, 0}, {1, 1}}, 2);
  for (Index c = 0; c < m2.num_cells(); ++c) {
    const auto p = m2.sibling_patch(c);
    REQUIRE(p.has_value());
    CHECK(std::count(p->elements.begin(), p->elements.end(), c) == 1);
    CHECK(p->size.x() == 0.5);
    std::set<Index> distinct(p->elements.begin(), p->elements.end());
    CHECK(distinct.size() == 4);
  }
  const auto p = m2.sibling_patch(*m2.find({2, 3, 2}));
  REQUIRE(p.has_value());
  CHECK(p->origin.isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK(p->elements[0] == *m2.find({2, 2, 2}));
  CHECK(p->elements[3] == *m2.find({2, 3, 3}));

  const QuadMesh m0 = uniform_mesh({{0, 0}, {1, 1}}, 0);
  CHECK_FALSE(m0.sibling_patch(0).has_value());

  // refine one sibling: the others lose their patch
  const std::array<Index, 1> mark{*m2.find({2, 0, 0})};
  const QuadMesh r = m2.refine(mark);
  CHECK_FALSE(r.sibling_patch(*r.find({2, 1, 0})).has_value());
  CHECK(r.sibling_patch(*r.find({3, 0, 0})).has_value());
}

TEST_CASE("random refinement keeps tiling, balance and constraint invariants") {
  std::mt19937 rng(7);
  QuadMesh mesh = uniform_mesh({{0, 0}, {2, 1}}, 1);
  for (int step = 0; step < 6; ++step) {
    std::vector<Index> marked;
    std::uniform_int_distribution<Index> pick(0, mesh.num_cells() - 1);
    for (int k = 0; k < 3; ++k) marked.push_back(pick(rng));
    const QuadMesh next = mesh.refine(marked);
    // monotone: each old leaf is a leaf or an ancestor of new leaves
    for (Index c = 0; c < mesh.num_cells(); ++c) {
      const Cell& old = mesh.cell(c);
      const bool leaf = next.find(old).has_value();
      const bool parent = next.covering_leaf(old) == std::nullopt;
      CHECK((leaf || parent));
    }
    for (Index c : marked) CHECK_FALSE(next.find(mesh.cell(c)).has_value());
    mesh = next;
    CHECK(std::abs(mesh.area() - 2.0) <= 1e-12 * 2.0);
    check_balance(mesh);
    check_constraints(mesh);
  }
  check_tiling(mesh, 64);
}

TEST_CASE("corner refinement cascades to restore 2:1 balance") {
  QuadMesh mesh = uniform_mesh({{0, 0}, {1, 1}}, 0);
  for (int k = 0; k < 5; ++k) {
    const std::array<Index, 1> mark{*mesh.find({k, 0, 0})};
    mesh = mesh.refine(mark);
  }
  CHECK(mesh.max_level() == 5);
  check_balance(mesh);
  check_constraints(mesh);
  check_tiling(mesh, 64);
}

TEST_CASE("masked L-shaped layout") {
  const QuadMesh l(Eigen::Vector2d(0, 0), 1.0, 2, 2, {true, false, true, true}, 0);
  CHECK(l.num_cells() == 3);
  CHECK(l.area() == doctest::Approx(3.0));
  const Index bl = *l.find({0, 0, 0});
  CHECK(l.neighbors(bl, Side::Right).kind == Neighbors::Kind::Boundary);
  CHECK(l.neighbors(bl, Side::Top).kind == Neighbors::Kind::Same);
  const QuadMesh r = l.refine(std::array<Index, 1>{bl});
  CHECK(r.num_cells() == 6);
  check_tiling(r, 32);
  check_constraints(r);
}
