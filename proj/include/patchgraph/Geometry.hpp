#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace patchgraph {

// Pixel coordinates: x is the column, y the row, origin at the top-left
// corner, y growing downwards.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(Point a, double k) { return {a.x * k, a.y * k}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

using PatchIndex = std::uint32_t;
using PatchPair = std::pair<PatchIndex, PatchIndex>;

/// Partition of a square image into n x n non-overlapping square patches.
/// Patch i sits at row i / n, column i % n and owns the half-open pixel
/// rectangle [x0, x0 + patch_size) x [y0, y0 + patch_size).
class PatchGrid {
public:
  PatchGrid() = default;
  /// Throws DataError unless image_size is a positive multiple of patch_size.
  PatchGrid(std::uint32_t image_size, std::uint32_t patch_size);

  std::uint32_t image_size() const { return image_size_; }
  std::uint32_t patch_size() const { return patch_size_; }
  std::uint32_t n() const { return image_size_ / patch_size_; }
  std::size_t patch_count() const { return std::size_t{n()} * n(); }

  std::uint32_t row(PatchIndex i) const { return i / n(); }
  std::uint32_t col(PatchIndex i) const { return i % n(); }
  PatchIndex index(std::uint32_t row, std::uint32_t col) const { return row * n() + col; }
  Point origin(PatchIndex i) const;
  Point center(PatchIndex i) const;
  bool contains(PatchIndex i, Point pt) const;

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

private:
  std::uint32_t image_size_ = 1024;
  std::uint32_t patch_size_ = 16;
};

/// Neighbour directions 0..7 as (drow, dcol), row-major. The opposite of
/// direction j is 7 - j.
inline constexpr std::array<std::pair<int, int>, 8> kNeighborOffsets = {{
    {-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1},
}};

constexpr int opposite_direction(int j) { return 7 - j; }

PatchIndex patch_of_point(Point pt, const PatchGrid& grid);
std::optional<PatchIndex> neighbor(PatchIndex i, int j, const PatchGrid& grid);
/// Direction j with neighbor(a, j) == b, if the patches are 8-adjacent.
std::optional<int> direction_between(PatchIndex a, PatchIndex b, const PatchGrid& grid);
bool patches_adjacent(PatchIndex a, PatchIndex b, const PatchGrid& grid);
bool patches_diagonal(PatchIndex a, PatchIndex b, const PatchGrid& grid);

struct RoadNode {
  Point pos;
  /// Patch the node was decoded from; only set on patch-wise graphs.
  std::optional<PatchIndex> patch;
};

struct RoadEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  /// Full polyline from node a to node b, or empty for a straight edge.
  std::vector<Point> poly;
};

/// Undirected road graph in pixel coordinates of a square image.
struct RoadGraph {
  std::uint32_t image_size = 1024;
  double width = 15.0;
  std::vector<RoadNode> nodes;
  std::vector<RoadEdge> edges;

  std::uint32_t add_node(Point pos, std::optional<PatchIndex> patch = std::nullopt);
  void add_edge(std::uint32_t a, std::uint32_t b, std::vector<Point> poly = {});

  /// Polyline of edge e including both endpoints.
  std::vector<Point> polyline(std::size_t e) const;
  std::vector<std::uint32_t> degrees() const;
};

/// Checks dense ids, edge endpoints, self-loops, duplicate edges, bounds and
/// polyline endpoints. Throws DataError on the first violation.
void validate(const RoadGraph& g);

/// Per-pixel values in [0, 1], row-major.
struct SegMask {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<float> values;

  SegMask() = default;
  SegMask(std::uint32_t w, std::uint32_t h, float fill = 0.0f)
      : width(w), height(h), values(std::size_t{w} * h, fill) {}

  float at(std::uint32_t x, std::uint32_t y) const { return values[std::size_t{y} * width + x]; }
  float& at(std::uint32_t x, std::uint32_t y) { return values[std::size_t{y} * width + x]; }
  bool road(std::uint32_t x, std::uint32_t y) const { return at(x, y) >= 0.5f; }
  std::size_t count_road() const;
};

double polyline_length(std::span<const Point> poly);
/// Point at arc length s from the start (clamped to the polyline).
Point point_at_arc_length(std::span<const Point> poly, double s);
double point_segment_distance(Point p, Point a, Point b);

/// Maximal sub-polylines of poly inside patch i. Pieces lying on the
/// bottom/right boundary belong to the next patch and are dropped, so every
/// positive-length piece of the input is reported by exactly one patch.
std::vector<std::vector<Point>> clip_polyline_to_patch(std::span<const Point> poly, PatchIndex i,
                                                       const PatchGrid& grid);

struct Cell {
  std::int64_t col = 0;
  std::int64_t row = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Ordered square cells of side cell_size visited by segment a-b, with
/// half-open cell ownership. At an exact corner crossing the walk steps
/// diagonally; with corner_cells the two cells sharing that corner are
/// reported as well (supercover behaviour).
std::vector<Cell> walk_cells(Point a, Point b, double cell_size, bool corner_cells);

/// Pixel (x, y) is set iff the lattice point (x, y) lies within width / 2 of
/// an edge polyline.
SegMask rasterize_graph(const RoadGraph& g, double width, std::uint32_t size);

/// One-pixel supercover of every edge polyline; pixel (x, y) covers
/// [x, x + 1) x [y, y + 1).
SegMask rasterize_centerline(const RoadGraph& g, std::uint32_t size);

} // namespace patchgraph
