#pragma once

// Adaptive quadtree mesh of square cells over a rectangular arrangement of
// square root cells. Leaves carry integer coordinates (level, i, j); refinement
// keeps adjacent leaves within one level of each other (2:1 balance) so every
// hanging Q2 node is constrained by the three nodes of one coarse edge.

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace lamopt {

using Index = std::ptrdiff_t;

struct Rect {
  Eigen::Vector2d lower{0, 0};
  Eigen::Vector2d upper{1, 1};

  double width() const { return upper.x() - lower.x(); }
  double height() const { return upper.y() - lower.y(); }
};

struct Cell {
  int level = 0;
  std::int64_t i = 0;
  std::int64_t j = 0;

  friend bool operator==(const Cell&, const Cell&) = default;
};

enum class Side { Left = 0, Right = 1, Bottom = 2, Top = 3 };
inline constexpr std::array<Side, 4> kSides{Side::Left, Side::Right, Side::Bottom, Side::Top};

/// Outward unit normal of a cell side.
Eigen::Vector2d side_normal(Side s);

/// Value of a hanging node = sum of weights[k] * value(masters[k]).
struct HangingConstraint {
  Index node = -1;
  std::array<Index, 3> masters{};
  std::array<double, 3> weights{};
};

struct Neighbors {
  enum class Kind { Boundary, Same, Coarser, Finer };
  Kind kind = Kind::Boundary;
  /// One leaf for Same/Coarser, two leaves (ordered along the side) for Finer.
  std::vector<Index> cells;
};

/// 2x2 block of leaf siblings. elements = lower-left, lower-right,
/// upper-left, upper-right.
struct ElementPatch {
  std::array<Index, 4> elements{};
  Eigen::Vector2d origin;
  Eigen::Vector2d size;
};

class QuadMesh {
 public:
  /// Square root cells of side `root_size` laid out nx x ny from `origin`;
  /// `active` (row-major, x fastest) masks roots out of the domain.
  QuadMesh(Eigen::Vector2d origin, double root_size, int nx, int ny, std::vector<bool> active,
           int level);

  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  const Cell& cell(Index c) const { return cells_[c]; }
  const std::vector<Cell>& cells() const { return cells_; }

  double cell_size(Index c) const { return level_size(cells_[c].level); }
  double level_size(int level) const;
  double cell_area(Index c) const { return cell_size(c) * cell_size(c); }
  Eigen::Vector2d cell_origin(Index c) const;
  Eigen::Vector2d cell_center(Index c) const;
  /// Physical point of local coordinates in [0, 1]^2.
  Eigen::Vector2d to_global(Index c, const Eigen::Vector2d& local) const;
  Eigen::Vector2d to_local(Index c, const Eigen::Vector2d& x) const;

  Index num_nodes() const { return static_cast<Index>(nodes_.size()); }
  const Eigen::Vector2d& node(Index n) const { return nodes_[n]; }
  /// Nine Q2 nodes of a cell, local index a + 3 b at local point (a/2, b/2).
  const std::array<Index, 9>& cell_nodes(Index c) const { return cell_nodes_[c]; }
  const std::vector<HangingConstraint>& constraints() const { return constraints_; }
  /// Index into constraints(), or -1 when the node is not hanging.
  Index constraint_of(Index node) const { return node_constraint_[node]; }
  Index num_hanging() const { return static_cast<Index>(constraints_.size()); }

  std::optional<Index> find(const Cell& c) const;
  Neighbors neighbors(Index c, Side s) const;
  std::optional<ElementPatch> sibling_patch(Index c) const;

  /// Refines the marked leaves and whatever else 2:1 balance requires.
  QuadMesh refine(std::span<const Index> marked) const;

  /// Leaf of this mesh containing the given cell (an ancestor or the cell
  /// itself), if any.
  std::optional<Index> covering_leaf(const Cell& c) const;

  double area() const;
  Eigen::Vector2d origin() const { return origin_; }
  double root_size() const { return root_size_; }
  int roots_x() const { return nx_; }
  int roots_y() const { return ny_; }
  bool root_active(std::int64_t i, std::int64_t j) const;
  /// Bounding rectangle of the root layout.
  Rect bounds() const;
  int max_level() const;

  static constexpr int kMaxLevel = 24;

 private:
  QuadMesh(const QuadMesh& parent, std::vector<Cell> leaves);
  void build();
  bool inside(const Cell& c) const;

  Eigen::Vector2d origin_;
  double root_size_ = 1;
  int nx_ = 1;
  int ny_ = 1;
  std::vector<bool> active_;

  std::vector<Cell> cells_;
  std::unordered_map<std::uint64_t, Index> lookup_;
  std::vector<Eigen::Vector2d> nodes_;
  std::vector<std::array<Index, 9>> cell_nodes_;
  std::vector<HangingConstraint> constraints_;
  std::vector<Index> node_constraint_;
};

/// Uniform mesh of an axis-aligned rectangle whose side ratio is an integer
/// (square root cells); 4^level cells per root.
QuadMesh uniform_mesh(const Rect& domain, int level);

}  // namespace lamopt
