#include "patchgraph/Geometry.hpp"

#include "patchgraph/Error.hpp"

#include <algorithm>
#include <limits>
#include <set>
#include <string>

namespace patchgraph {

PatchGrid::PatchGrid(std::uint32_t image_size, std::uint32_t patch_size)
    : image_size_(image_size), patch_size_(patch_size)
{
  if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
    throw DataError("image size " + std::to_string(image_size) +
                    " is not a positive multiple of patch size " + std::to_string(patch_size));
  }
}

Point PatchGrid::origin(PatchIndex i) const
{
  return {static_cast<double>(col(i)) * patch_size_, static_cast<double>(row(i)) * patch_size_};
}

Point PatchGrid::center(PatchIndex i) const
{
  const double half = patch_size_ / 2.0;
  return origin(i) + Point{half, half};
}

bool PatchGrid::contains(PatchIndex i, Point pt) const
{
  const Point o = origin(i);
  return pt.x >= o.x && pt.x < o.x + patch_size_ && pt.y >= o.y && pt.y < o.y + patch_size_;
}

PatchIndex patch_of_point(Point pt, const PatchGrid& grid)
{
  const double size = grid.image_size();
  if (!(pt.x >= 0.0 && pt.x < size && pt.y >= 0.0 && pt.y < size)) {
    throw DataError("point (" + std::to_string(pt.x) + ", " + std::to_string(pt.y) +
                    ") lies outside the image");
  }
  const auto col = static_cast<std::uint32_t>(std::floor(pt.x / grid.patch_size()));
  const auto row = static_cast<std::uint32_t>(std::floor(pt.y / grid.patch_size()));
  return grid.index(std::min(row, grid.n() - 1), std::min(col, grid.n() - 1));
}

std::optional<PatchIndex> neighbor(PatchIndex i, int j, const PatchGrid& grid)
{
  if (j < 0 || j > 7 || i >= grid.patch_count()) return std::nullopt;
  const auto [dr, dc] = kNeighborOffsets[static_cast<std::size_t>(j)];
  const std::int64_t r = static_cast<std::int64_t>(grid.row(i)) + dr;
  const std::int64_t c = static_cast<std::int64_t>(grid.col(i)) + dc;
  const std::int64_t n = grid.n();
  if (r < 0 || c < 0 || r >= n || c >= n) return std::nullopt;
  return grid.index(static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c));
}

std::optional<int> direction_between(PatchIndex a, PatchIndex b, const PatchGrid& grid)
{
  if (a >= grid.patch_count() || b >= grid.patch_count()) return std::nullopt;
  const std::int64_t dr = static_cast<std::int64_t>(grid.row(b)) - grid.row(a);
  const std::int64_t dc = static_cast<std::int64_t>(grid.col(b)) - grid.col(a);
  for (int j = 0; j < 8; ++j) {
    if (kNeighborOffsets[static_cast<std::size_t>(j)] == std::pair<int, int>{static_cast<int>(dr), static_cast<int>(dc)}) {
      return j;
    }
  }
  return std::nullopt;
}

bool patches_adjacent(PatchIndex a, PatchIndex b, const PatchGrid& grid)
{
  return direction_between(a, b, grid).has_value();
}

bool patches_diagonal(PatchIndex a, PatchIndex b, const PatchGrid& grid)
{
  const auto j = direction_between(a, b, grid);
  return j && (*j == 0 || *j == 2 || *j == 5 || *j == 7);
}

std::uint32_t RoadGraph::add_node(Point pos, std::optional<PatchIndex> patch)
{
  nodes.push_back({pos, patch});
  return static_cast<std::uint32_t>(nodes.size() - 1);
}

void RoadGraph::add_edge(std::uint32_t a, std::uint32_t b, std::vector<Point> poly)
{
  edges.push_back({a, b, std::move(poly)});
}

std::vector<Point> RoadGraph::polyline(std::size_t e) const
{
  const RoadEdge& edge = edges[e];
  if (!edge.poly.empty()) return edge.poly;
  return {nodes[edge.a].pos, nodes[edge.b].pos};
}

std::vector<std::uint32_t> RoadGraph::degrees() const
{
  std::vector<std::uint32_t> deg(nodes.size(), 0);
  for (const RoadEdge& e : edges) {
    ++deg[e.a];
    ++deg[e.b];
  }
  return deg;
}

void validate(const RoadGraph& g)
{
  const double size = g.image_size;
  auto in_bounds = [size](Point p) { return p.x >= 0.0 && p.x < size && p.y >= 0.0 && p.y < size; };
  if (g.image_size == 0) throw DataError("graph image_size must be positive");
  if (!(g.width > 0.0)) throw DataError("graph width must be positive");
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (!in_bounds(g.nodes[i].pos)) {
      throw DataError("node " + std::to_string(i) + " lies outside the image");
    }
  }
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  constexpr double kEndpointTol = 1e-6;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const RoadEdge& edge = g.edges[e];
    if (edge.a >= g.nodes.size() || edge.b >= g.nodes.size()) {
      throw DataError("edge " + std::to_string(e) + " references a missing node");
    }
    if (edge.a == edge.b) throw DataError("edge " + std::to_string(e) + " is a self-loop");
    if (!seen.insert(std::minmax(edge.a, edge.b)).second) {
      throw DataError("duplicate edge " + std::to_string(edge.a) + "-" + std::to_string(edge.b));
    }
    if (!edge.poly.empty()) {
      if (edge.poly.size() < 2 ||
          distance(edge.poly.front(), g.nodes[edge.a].pos) > kEndpointTol ||
          distance(edge.poly.back(), g.nodes[edge.b].pos) > kEndpointTol) {
        throw DataError("polyline of edge " + std::to_string(e) + " does not join its endpoints");
      }
      for (Point p : edge.poly) {
        if (!in_bounds(p)) throw DataError("polyline of edge " + std::to_string(e) + " leaves the image");
      }
    }
  }
}

std::size_t SegMask::count_road() const
{
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](float v) { return v >= 0.5f; }));
}

double polyline_length(std::span<const Point> poly)
{
  double len = 0.0;
  for (std::size_t k = 1; k < poly.size(); ++k) len += distance(poly[k - 1], poly[k]);
  return len;
}

Point point_at_arc_length(std::span<const Point> poly, double s)
{
  if (poly.empty()) return {};
  if (s <= 0.0) return poly.front();
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const double seg = distance(poly[k - 1], poly[k]);
    if (s <= seg && seg > 0.0) return poly[k - 1] + (poly[k] - poly[k - 1]) * (s / seg);
    s -= seg;
  }
  return poly.back();
}

double point_segment_distance(Point p, Point a, Point b)
{
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

namespace {

// Liang-Barsky against the closed rectangle.
std::optional<std::pair<double, double>> clip_segment(Point a, Point b, Point lo, Point hi)
{
  double t0 = 0.0;
  double t1 = 1.0;
  const double d[2] = {b.x - a.x, b.y - a.y};
  const double start[2] = {a.x, a.y};
  const double mins[2] = {lo.x, lo.y};
  const double maxs[2] = {hi.x, hi.y};
  for (int axis = 0; axis < 2; ++axis) {
    const double p1 = -d[axis];
    const double q1 = start[axis] - mins[axis];
    const double p2 = d[axis];
    const double q2 = maxs[axis] - start[axis];
    for (auto [p, q] : {std::pair{p1, q1}, std::pair{p2, q2}}) {
      if (p == 0.0) {
        if (q < 0.0) return std::nullopt;
      } else {
        const double r = q / p;
        if (p < 0.0) {
          if (r > t1) return std::nullopt;
          t0 = std::max(t0, r);
        } else {
          if (r < t0) return std::nullopt;
          t1 = std::min(t1, r);
        }
      }
    }
  }
  if (t0 > t1) return std::nullopt;
  return std::pair{t0, t1};
}

} // namespace

std::vector<std::vector<Point>> clip_polyline_to_patch(std::span<const Point> poly, PatchIndex i,
                                                       const PatchGrid& grid)
{
  std::vector<std::vector<Point>> fragments;
  if (poly.size() < 2 || polyline_length(poly) == 0.0) return fragments;

  const Point lo = grid.origin(i);
  const Point hi = lo + Point{static_cast<double>(grid.patch_size()), static_cast<double>(grid.patch_size())};
  bool open = false; // last piece reached the end of its segment inside the patch
  for (std::size_t k = 1; k < poly.size(); ++k) {
    const Point a = poly[k - 1];
    const Point b = poly[k];
    if (a == b) continue;
    const auto clipped = clip_segment(a, b, lo, hi);
    if (!clipped || clipped->second <= clipped->first) {
      open = false;
      continue;
    }
    const auto [t0, t1] = *clipped;
    const Point p0 = t0 == 0.0 ? a : a + (b - a) * t0;
    const Point p1 = t1 == 1.0 ? b : a + (b - a) * t1;
    const Point mid = (p0 + p1) * 0.5;
    if (!(mid.x >= lo.x && mid.x < hi.x && mid.y >= lo.y && mid.y < hi.y)) {
      open = false;
      continue;
    }
    if (open && t0 == 0.0) {
      fragments.back().push_back(p1);
    } else {
      fragments.push_back({p0, p1});
    }
    open = t1 == 1.0;
  }
  return fragments;
}

std::vector<Cell> walk_cells(Point a, Point b, double cell_size, bool corner_cells)
{
  std::vector<Cell> cells;
  std::int64_t cx = static_cast<std::int64_t>(std::floor(a.x / cell_size));
  std::int64_t cy = static_cast<std::int64_t>(std::floor(a.y / cell_size));
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const int sx = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
  const int sy = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Parameter at which the walk leaves the current cell along one axis.
  auto exit_t = [cell_size](std::int64_t c, int s, double from, double d) {
    if (s == 0) return kInf;
    const double boundary = static_cast<double>(s > 0 ? c + 1 : c) * cell_size;
    return (boundary - from) / d;
  };
  // Moving in the positive direction the crossing point already belongs to
  // the next cell; moving negatively it still belongs to the current one.
  auto admits = [](int s, double t) { return s > 0 ? t <= 1.0 : t < 1.0; };

  cells.push_back({cx, cy});
  for (;;) {
    const double tx = exit_t(cx, sx, a.x, dx);
    const double ty = exit_t(cy, sy, a.y, dy);
    if (tx < ty) {
      if (!admits(sx, tx)) break;
      cx += sx;
    } else if (ty < tx) {
      if (!admits(sy, ty)) break;
      cy += sy;
    } else {
      if (tx == kInf) break;
      const bool ok_x = admits(sx, tx);
      const bool ok_y = admits(sy, ty);
      if (ok_x && ok_y) {
        if (corner_cells) {
          cells.push_back({cx + sx, cy});
          cells.push_back({cx, cy + sy});
        }
        cx += sx;
        cy += sy;
      } else if (ok_x) {
        cx += sx;
      } else if (ok_y) {
        cy += sy;
      } else {
        break;
      }
    }
    cells.push_back({cx, cy});
  }
  return cells;
}

SegMask rasterize_graph(const RoadGraph& g, double width, std::uint32_t size)
{
  if (!(width >= 1.0)) throw DataError("raster width must be at least 1 pixel");
  SegMask mask(size, size);
  const double r = width / 2.0;
  const double r2 = r * r;
  const auto last = static_cast<double>(size) - 1.0;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const std::vector<Point> poly = g.polyline(e);
    for (std::size_t k = 1; k < poly.size(); ++k) {
      const Point a = poly[k - 1];
      const Point b = poly[k];
      const double x0 = std::clamp(std::ceil(std::min(a.x, b.x) - r), 0.0, last);
      const double x1 = std::clamp(std::floor(std::max(a.x, b.x) + r), 0.0, last);
      const double y0 = std::clamp(std::ceil(std::min(a.y, b.y) - r), 0.0, last);
      const double y1 = std::clamp(std::floor(std::max(a.y, b.y) + r), 0.0, last);
      const Point ab = b - a;
      const double len2 = dot(ab, ab);
      for (double y = y0; y <= y1; y += 1.0) {
        for (double x = x0; x <= x1; x += 1.0) {
          const Point p{x, y};
          const double t = len2 == 0.0 ? 0.0 : std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
          const Point d = p - (a + ab * t);
          if (dot(d, d) <= r2) {
            mask.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)) = 1.0f;
          }
        }
      }
    }
  }
  return mask;
}

SegMask rasterize_centerline(const RoadGraph& g, std::uint32_t size)
{
  SegMask mask(size, size);
  const auto limit = static_cast<std::int64_t>(size);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const std::vector<Point> poly = g.polyline(e);
    for (std::size_t k = 1; k < poly.size(); ++k) {
      for (const Cell& c : walk_cells(poly[k - 1], poly[k], 1.0, true)) {
        if (c.col >= 0 && c.row >= 0 && c.col < limit && c.row < limit) {
          mask.at(static_cast<std::uint32_t>(c.col), static_cast<std::uint32_t>(c.row)) = 1.0f;
        }
      }
    }
  }
  return mask;
}

} // namespace patchgraph
