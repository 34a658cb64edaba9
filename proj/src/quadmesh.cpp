#include "lamopt/quadmesh.hpp"

#include "lamopt/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>
#include <unordered_set>

namespace lamopt {

namespace {

std::uint64_t cell_key(int level, std::int64_t i, std::int64_t j) {
  return (static_cast<std::uint64_t>(level) << 58) | (static_cast<std::uint64_t>(i) << 29) |
         static_cast<std::uint64_t>(j);
}

std::uint64_t cell_key(const Cell& c) { return cell_key(c.level, c.i, c.j); }

// Node coordinates in units of half a finest-level cell.
std::uint64_t node_key(std::int64_t x, std::int64_t y) {
  return (static_cast<std::uint64_t>(x) << 32) | static_cast<std::uint64_t>(y);
}

std::array<std::int64_t, 2> side_offset(Side s) {
  switch (s) {
    case Side::Left: return {-1, 0};
    case Side::Right: return {1, 0};
    case Side::Bottom: return {0, -1};
    case Side::Top: return {0, 1};
  }
  return {0, 0};
}

// Local node indices (a + 3 b) along a side, ordered by increasing coordinate.
std::array<int, 3> side_nodes(Side s) {
  switch (s) {
    case Side::Left: return {0, 3, 6};
    case Side::Right: return {2, 5, 8};
    case Side::Bottom: return {0, 1, 2};
    case Side::Top: return {6, 7, 8};
  }
  return {0, 0, 0};
}

bool cell_less(const Cell& a, const Cell& b) {
  if (a.level != b.level) return a.level < b.level;
  if (a.j != b.j) return a.j < b.j;
  return a.i < b.i;
}

}  // namespace

Eigen::Vector2d side_normal(Side s) {
  const auto o = side_offset(s);
  return {static_cast<double>(o[0]), static_cast<double>(o[1])};
}

QuadMesh::QuadMesh(Eigen::Vector2d origin, double root_size, int nx, int ny,
                   std::vector<bool> active, int level)
    : origin_(origin), root_size_(root_size), nx_(nx), ny_(ny), active_(std::move(active)) {
  if (nx < 1 || ny < 1 || root_size <= 0) throw std::invalid_argument("QuadMesh: bad root layout");
  if (static_cast<int>(active_.size()) != nx * ny)
    throw std::invalid_argument("QuadMesh: mask size does not match root layout");
  if (level < 0 || level > kMaxLevel) throw std::invalid_argument("QuadMesh: level out of range");
  const std::int64_t n = std::int64_t{1} << level;
  for (std::int64_t j = 0; j < ny * n; ++j)
    for (std::int64_t i = 0; i < nx * n; ++i)
      if (root_active(i >> level, j >> level)) cells_.push_back({level, i, j});
  if (cells_.empty()) throw std::invalid_argument("QuadMesh: no active roots");
  build();
}

QuadMesh::QuadMesh(const QuadMesh& parent, std::vector<Cell> leaves)
    : origin_(parent.origin_),
      root_size_(parent.root_size_),
      nx_(parent.nx_),
      ny_(parent.ny_),
      active_(parent.active_),
      cells_(std::move(leaves)) {
  build();
}

double QuadMesh::level_size(int level) const { return std::ldexp(root_size_, -level); }

Eigen::Vector2d QuadMesh::cell_origin(Index c) const {
  const Cell& cl = cells_[c];
  const double h = level_size(cl.level);
  return origin_ + Eigen::Vector2d(static_cast<double>(cl.i) * h, static_cast<double>(cl.j) * h);
}

Eigen::Vector2d QuadMesh::cell_center(Index c) const {
  return to_global(c, Eigen::Vector2d(0.5, 0.5));
}

Eigen::Vector2d QuadMesh::to_global(Index c, const Eigen::Vector2d& local) const {
  return cell_origin(c) + cell_size(c) * local;
}

Eigen::Vector2d QuadMesh::to_local(Index c, const Eigen::Vector2d& x) const {
  return (x - cell_origin(c)) / cell_size(c);
}

bool QuadMesh::root_active(std::int64_t i, std::int64_t j) const {
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return false;
  return active_[static_cast<std::size_t>(j * nx_ + i)];
}

bool QuadMesh::inside(const Cell& c) const {
  if (c.i < 0 || c.j < 0) return false;
  return root_active(c.i >> c.level, c.j >> c.level);
}

Rect QuadMesh::bounds() const {
  return {origin_, origin_ + Eigen::Vector2d(nx_ * root_size_, ny_ * root_size_)};
}

int QuadMesh::max_level() const {
  int l = 0;
  for (const Cell& c : cells_) l = std::max(l, c.level);
  return l;
}

double QuadMesh::area() const {
  double a = 0;
  for (Index c = 0; c < num_cells(); ++c) a += cell_area(c);
  return a;
}

std::optional<Index> QuadMesh::find(const Cell& c) const {
  if (c.i < 0 || c.j < 0 || c.level < 0) return std::nullopt;
  const auto it = lookup_.find(cell_key(c));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<Index> QuadMesh::covering_leaf(const Cell& c) const {
  for (int k = c.level; k >= 0; --k) {
    const int up = c.level - k;
    if (auto f = find({k, c.i >> up, c.j >> up})) return f;
  }
  return std::nullopt;
}

Neighbors QuadMesh::neighbors(Index c, Side s) const {
  const Cell& cl = cells_[c];
  const auto o = side_offset(s);
  const Cell n{cl.level, cl.i + o[0], cl.j + o[1]};
  Neighbors out;
  if (!inside(n)) return out;
  if (auto f = find(n)) {
    out.kind = Neighbors::Kind::Same;
    out.cells = {*f};
    return out;
  }
  if (cl.level > 0) {
    if (auto f = find({cl.level - 1, n.i >> 1, n.j >> 1})) {
      out.kind = Neighbors::Kind::Coarser;
      out.cells = {*f};
      return out;
    }
  }
  // Refined neighbour: the two children touching this side.
  out.kind = Neighbors::Kind::Finer;
  const int l = cl.level + 1;
  const std::int64_t bi = 2 * n.i, bj = 2 * n.j;
  std::array<Cell, 2> kids;
  switch (s) {
    case Side::Left: kids = {Cell{l, bi + 1, bj}, Cell{l, bi + 1, bj + 1}}; break;
    case Side::Right: kids = {Cell{l, bi, bj}, Cell{l, bi, bj + 1}}; break;
    case Side::Bottom: kids = {Cell{l, bi, bj + 1}, Cell{l, bi + 1, bj + 1}}; break;
    case Side::Top: kids = {Cell{l, bi, bj}, Cell{l, bi + 1, bj}}; break;
  }
  for (const Cell& k : kids) {
    auto f = find(k);
    if (!f) throw std::logic_error("QuadMesh::neighbors: 2:1 balance violated");
    out.cells.push_back(*f);
  }
  return out;
}

std::optional<ElementPatch> QuadMesh::sibling_patch(Index c) const {
  const Cell& cl = cells_[c];
  if (cl.level == 0) return std::nullopt;
  const std::int64_t pi = cl.i >> 1, pj = cl.j >> 1;
  ElementPatch patch;
  for (int b = 0; b < 2; ++b)
    for (int a = 0; a < 2; ++a) {
      auto f = find({cl.level, 2 * pi + a, 2 * pj + b});
      if (!f) return std::nullopt;
      patch.elements[a + 2 * b] = *f;
    }
  patch.origin = cell_origin(patch.elements[0]);
  const double h = 2 * cell_size(c);
  patch.size = Eigen::Vector2d(h, h);
  return patch;
}

QuadMesh QuadMesh::refine(std::span<const Index> marked) const {
  std::unordered_set<std::uint64_t> leaves;
  leaves.reserve(cells_.size() * 2);
  for (const Cell& c : cells_) leaves.insert(cell_key(c));

  auto is_leaf = [&](const Cell& c) { return leaves.count(cell_key(c)) > 0; };

  std::deque<Cell> work;
  for (Index id : marked) {
    if (id < 0 || id >= num_cells()) throw std::out_of_range("QuadMesh::refine: bad cell id");
    work.push_back(cells_[id]);
  }

  while (!work.empty()) {
    const Cell c = work.front();
    work.pop_front();
    if (!is_leaf(c)) continue;
    if (c.level + 1 > kMaxLevel) throw std::runtime_error("QuadMesh::refine: maximum level reached");
    leaves.erase(cell_key(c));
    for (int b = 0; b < 2; ++b)
      for (int a = 0; a < 2; ++a) leaves.insert(cell_key(c.level + 1, 2 * c.i + a, 2 * c.j + b));
    // Children sit at level + 1, so edge neighbours coarser than c must split.
    for (Side s : kSides) {
      const auto o = side_offset(s);
      const Cell n{c.level, c.i + o[0], c.j + o[1]};
      if (!inside(n)) continue;
      for (int k = c.level - 1; k >= 0; --k) {
        const int up = c.level - k;
        const Cell anc{k, n.i >> up, n.j >> up};
        if (is_leaf(anc)) {
          work.push_back(anc);
          break;
        }
      }
    }
  }

  std::vector<Cell> out;
  out.reserve(leaves.size());
  for (std::uint64_t key : leaves) {
    const int level = static_cast<int>(key >> 58);
    const std::int64_t i = static_cast<std::int64_t>((key >> 29) & ((std::uint64_t{1} << 29) - 1));
    const std::int64_t j = static_cast<std::int64_t>(key & ((std::uint64_t{1} << 29) - 1));
    out.push_back({level, i, j});
  }
  return QuadMesh(*this, std::move(out));
}

void QuadMesh::build() {
  std::sort(cells_.begin(), cells_.end(), cell_less);
  lookup_.clear();
  lookup_.reserve(cells_.size() * 2);
  for (Index c = 0; c < num_cells(); ++c) lookup_.emplace(cell_key(cells_[c]), c);

  nodes_.clear();
  cell_nodes_.assign(cells_.size(), {});
  std::unordered_map<std::uint64_t, Index> node_ids;
  node_ids.reserve(cells_.size() * 4);
  const double unit = std::ldexp(root_size_, -(kMaxLevel + 1));
  for (Index c = 0; c < num_cells(); ++c) {
    const Cell& cl = cells_[c];
    const int shift = kMaxLevel - cl.level;
    for (int b = 0; b < 3; ++b)
      for (int a = 0; a < 3; ++a) {
        const std::int64_t x = (2 * cl.i + a) << shift;
        const std::int64_t y = (2 * cl.j + b) << shift;
        auto [it, fresh] = node_ids.emplace(node_key(x, y), num_nodes());
        if (fresh)
          nodes_.push_back(origin_ + Eigen::Vector2d(static_cast<double>(x) * unit,
                                                     static_cast<double>(y) * unit));
        cell_nodes_[c][a + 3 * b] = it->second;
      }
  }

  // A leaf whose edge neighbour is one level coarser owns a hanging node at
  // the midpoint of that edge; it interpolates the coarse edge quadratically.
  constraints_.clear();
  node_constraint_.assign(nodes_.size(), -1);
  for (Index c = 0; c < num_cells(); ++c) {
    for (Side s : kSides) {
      const Neighbors nb = neighbors(c, s);
      if (nb.kind != Neighbors::Kind::Coarser) continue;
      const Index coarse = nb.cells.front();
      const Index hanging = cell_nodes_[c][side_nodes(s)[1]];
      if (node_constraint_[hanging] >= 0) continue;
      // The coarse cell sees this edge from the opposite side.
      Side opposite = s;
      switch (s) {
        case Side::Left: opposite = Side::Right; break;
        case Side::Right: opposite = Side::Left; break;
        case Side::Bottom: opposite = Side::Top; break;
        case Side::Top: opposite = Side::Bottom; break;
      }
      const auto cn = side_nodes(opposite);
      HangingConstraint hc;
      hc.node = hanging;
      const Eigen::Vector2d p0 = nodes_[cell_nodes_[coarse][cn[0]]];
      const Eigen::Vector2d p2 = nodes_[cell_nodes_[coarse][cn[2]]];
      const double t = (nodes_[hanging] - p0).norm() / (p2 - p0).norm();
      const auto w = quadratic_basis(t);
      for (int k = 0; k < 3; ++k) {
        hc.masters[k] = cell_nodes_[coarse][cn[k]];
        hc.weights[k] = w[k];
      }
      node_constraint_[hanging] = static_cast<Index>(constraints_.size());
      constraints_.push_back(hc);
    }
  }
}

QuadMesh uniform_mesh(const Rect& domain, int level) {
  const double w = domain.width(), h = domain.height();
  if (!(w > 0 && h > 0)) throw std::invalid_argument("uniform_mesh: empty domain");
  const double side = std::min(w, h);
  const double rx = w / side, ry = h / side;
  const int nx = static_cast<int>(std::lround(rx)), ny = static_cast<int>(std::lround(ry));
  if (std::abs(rx - nx) > 1e-12 * rx || std::abs(ry - ny) > 1e-12 * ry)
    throw std::invalid_argument("uniform_mesh: side ratio must be an integer");
  return QuadMesh(domain.lower, side, nx, ny, std::vector<bool>(nx * ny, true), level);
}

}  // namespace lamopt
