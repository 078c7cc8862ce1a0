#include "patchgraph/Skeleton.hpp"

#include "patchgraph/Error.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>

namespace patchgraph {
namespace {

// Ring order N, NE, E, SE, S, SW, W, NW as (dx, dy).
constexpr std::array<std::pair<int, int>, 8> kRing = {{
    {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1},
}};

// Binary image with a one-pixel background border.
class Bitmap {
public:
  explicit Bitmap(const SegMask& mask) : w_(mask.width), h_(mask.height), px_((w_ + 2) * (h_ + 2), 0)
  {
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) set(x, y, mask.road(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)));
    }
  }

  int width() const { return w_; }
  int height() const { return h_; }
  bool get(int x, int y) const { return px_[idx(x, y)] != 0; }
  void set(int x, int y, bool v) { px_[idx(x, y)] = v ? 1 : 0; }

  std::array<int, 8> ring(int x, int y) const
  {
    std::array<int, 8> r{};
    for (std::size_t k = 0; k < 8; ++k) r[k] = get(x + kRing[k].first, y + kRing[k].second) ? 1 : 0;
    return r;
  }

  SegMask to_mask() const
  {
    SegMask out(static_cast<std::uint32_t>(w_), static_cast<std::uint32_t>(h_));
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        if (get(x, y)) out.at(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)) = 1.0f;
      }
    }
    return out;
  }

private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y + 1) * static_cast<std::size_t>(w_ + 2) + static_cast<std::size_t>(x + 1); }

  int w_;
  int h_;
  std::vector<std::uint8_t> px_;
};

int neighbor_count(const std::array<int, 8>& r)
{
  int b = 0;
  for (int v : r) b += v;
  return b;
}

// Yokoi connectivity number for 8-connected foreground; a pixel is simple
// (removable without changing topology) iff it equals 1.
int connectivity_number(const std::array<int, 8>& r)
{
  // x1..x8 = E, NE, N, NW, W, SW, S, SE
  const std::array<int, 8> x = {r[2], r[1], r[0], r[7], r[6], r[5], r[4], r[3]};
  int c = 0;
  for (std::size_t k = 0; k < 8; k += 2) {
    const int a = 1 - x[k];
    const int b = 1 - x[k + 1];
    const int d = 1 - x[(k + 2) % 8];
    c += a - a * b * d;
  }
  return c;
}

bool removable(const Bitmap& bm, int x, int y)
{
  const auto r = bm.ring(x, y);
  return neighbor_count(r) >= 2 && connectivity_number(r) == 1;
}

// Directional condition of the two subcycles: south-east boundary first,
// north-west boundary second.
bool facing(const std::array<int, 8>& r, int subcycle)
{
  const int n = r[0], e = r[2], s = r[4], w = r[6];
  if (subcycle == 0) return n * e * s == 0 && e * s * w == 0;
  return n * e * w == 0 && n * s * w == 0;
}

} // namespace

SegMask thin_mask(const SegMask& mask)
{
  Bitmap bm(mask);
  std::vector<std::pair<int, int>> candidates;
  for (bool changed = true; changed;) {
    changed = false;
    for (int sub = 0; sub < 2; ++sub) {
      candidates.clear();
      for (int y = 0; y < bm.height(); ++y) {
        for (int x = 0; x < bm.width(); ++x) {
          if (bm.get(x, y) && removable(bm, x, y) && facing(bm.ring(x, y), sub)) candidates.emplace_back(x, y);
        }
      }
      // Sequential re-check keeps every deletion topology-preserving.
      for (const auto& [x, y] : candidates) {
        if (removable(bm, x, y)) {
          bm.set(x, y, false);
          changed = true;
        }
      }
    }
  }
  return bm.to_mask();
}

bool is_thin(const SegMask& mask)
{
  const Bitmap bm(mask);
  for (int y = 0; y < bm.height(); ++y) {
    for (int x = 0; x < bm.width(); ++x) {
      if (bm.get(x, y) && removable(bm, x, y)) return false;
    }
  }
  return true;
}

namespace {

void simplify_range(std::span<const Point> poly, std::size_t first, std::size_t last, double tol,
                    std::vector<bool>& keep)
{
  if (last <= first + 1) return;
  double worst = -1.0;
  std::size_t at = first;
  for (std::size_t k = first + 1; k < last; ++k) {
    const double d = point_segment_distance(poly[k], poly[first], poly[last]);
    if (d > worst) {
      worst = d;
      at = k;
    }
  }
  if (worst <= tol) return;
  keep[at] = true;
  simplify_range(poly, first, at, tol, keep);
  simplify_range(poly, at, last, tol, keep);
}

} // namespace

std::vector<Point> simplify_polyline(std::span<const Point> poly, double tol)
{
  if (poly.size() <= 2) return {poly.begin(), poly.end()};
  std::vector<bool> keep(poly.size(), false);
  keep.front() = keep.back() = true;
  simplify_range(poly, 0, poly.size() - 1, tol, keep);
  std::vector<Point> out;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    if (keep[k]) out.push_back(poly[k]);
  }
  return out;
}

namespace {

constexpr int kNoNode = -1;

class SkeletonTracer {
public:
  SkeletonTracer(const Bitmap& bm, double tol) : bm_(bm), tol_(tol)
  {
    const std::size_t count = static_cast<std::size_t>(bm.width()) * static_cast<std::size_t>(bm.height());
    node_of_.assign(count, kNoNode);
    visited_.assign(count, false);
    degree_.assign(count, 0);
    graph_.image_size = static_cast<std::uint32_t>(bm.width());
    for (int y = 0; y < bm.height(); ++y) {
      for (int x = 0; x < bm.width(); ++x) {
        if (bm.get(x, y)) degree_[at(x, y)] = neighbor_count(bm.ring(x, y));
      }
    }
  }

  RoadGraph run()
  {
    make_nodes();
    for (int y = 0; y < bm_.height(); ++y) {
      for (int x = 0; x < bm_.width(); ++x) {
        if (node_of_[at(x, y)] != kNoNode) trace_from(x, y);
      }
    }
    // Closed loops without any node pixel.
    for (int y = 0; y < bm_.height(); ++y) {
      for (int x = 0; x < bm_.width(); ++x) {
        const std::size_t k = at(x, y);
        if (bm_.get(x, y) && degree_[k] == 2 && node_of_[k] == kNoNode && !visited_[k]) {
          node_of_[k] = static_cast<int>(graph_.add_node(pixel(x, y)));
          trace_from(x, y);
        }
      }
    }
    return std::move(graph_);
  }

private:
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * static_cast<std::size_t>(bm_.width()) + static_cast<std::size_t>(x); }
  static Point pixel(int x, int y) { return {static_cast<double>(x), static_cast<double>(y)}; }
  bool is_node_pixel(int x, int y) const { return node_of_[at(x, y)] != kNoNode; }

  void make_nodes()
  {
    for (int y = 0; y < bm_.height(); ++y) {
      for (int x = 0; x < bm_.width(); ++x) {
        const std::size_t k = at(x, y);
        if (!bm_.get(x, y) || node_of_[k] != kNoNode) continue;
        if (degree_[k] == 1) {
          node_of_[k] = static_cast<int>(graph_.add_node(pixel(x, y)));
        } else if (degree_[k] >= 3) {
          make_junction(x, y);
        }
      }
    }
  }

  void make_junction(int x0, int y0)
  {
    const int id = static_cast<int>(graph_.add_node({}));
    std::vector<std::pair<int, int>> stack{{x0, y0}};
    node_of_[at(x0, y0)] = id;
    double sx = 0.0;
    double sy = 0.0;
    std::size_t n = 0;
    while (!stack.empty()) {
      const auto [x, y] = stack.back();
      stack.pop_back();
      sx += x;
      sy += y;
      ++n;
      for (const auto& [dx, dy] : kRing) {
        const int nx = x + dx;
        const int ny = y + dy;
        if (!bm_.get(nx, ny)) continue;
        const std::size_t k = at(nx, ny);
        if (degree_[k] >= 3 && node_of_[k] == kNoNode) {
          node_of_[k] = id;
          stack.emplace_back(nx, ny);
        }
      }
    }
    graph_.nodes[static_cast<std::size_t>(id)].pos = {sx / static_cast<double>(n), sy / static_cast<double>(n)};
  }

  void trace_from(int x, int y)
  {
    const int from = node_of_[at(x, y)];
    for (const auto& [dx, dy] : kRing) {
      const int nx = x + dx;
      const int ny = y + dy;
      if (!bm_.get(nx, ny)) continue;
      const std::size_t k = at(nx, ny);
      if (node_of_[k] != kNoNode) {
        if (node_of_[k] != from) add_chain(from, {}, node_of_[k], false);
        continue;
      }
      if (visited_[k]) continue;
      walk(from, x, y, nx, ny);
    }
  }

  void walk(int from, int px, int py, int x, int y)
  {
    std::vector<Point> pixels{pixel(x, y)};
    visited_[at(x, y)] = true;
    for (;;) {
      std::optional<std::pair<int, int>> next;
      for (const auto& [dx, dy] : kRing) {
        const int nx = x + dx;
        const int ny = y + dy;
        if ((nx == px && ny == py) || !bm_.get(nx, ny)) continue;
        next = std::pair{nx, ny};
        break;
      }
      if (!next) return; // cannot happen on a thin skeleton
      const auto [nx, ny] = *next;
      const std::size_t k = at(nx, ny);
      if (node_of_[k] != kNoNode) {
        add_chain(from, std::move(pixels), node_of_[k], true);
        return;
      }
      if (visited_[k]) return;
      visited_[k] = true;
      pixels.push_back(pixel(nx, ny));
      px = x;
      py = y;
      x = nx;
      y = ny;
    }
  }

  // Self-loops and parallel chains are split at their middle pixel so the
  // result stays a simple graph.
  void add_chain(int a, std::vector<Point> pixels, int b, bool report_duplicates)
  {
    const auto key = std::minmax(a, b);
    if (a == b || edges_.count(key) != 0) {
      if (!report_duplicates || pixels.size() < (a == b ? 3u : 1u)) return;
      const std::size_t mid = pixels.size() / 2;
      const int m = static_cast<int>(graph_.add_node(pixels[mid]));
      add_chain(a, {pixels.begin(), pixels.begin() + static_cast<std::ptrdiff_t>(mid)}, m, true);
      add_chain(m, {pixels.begin() + static_cast<std::ptrdiff_t>(mid) + 1, pixels.end()}, b, true);
      return;
    }
    edges_.insert(key);
    std::vector<Point> poly;
    poly.reserve(pixels.size() + 2);
    poly.push_back(graph_.nodes[static_cast<std::size_t>(a)].pos);
    poly.insert(poly.end(), pixels.begin(), pixels.end());
    poly.push_back(graph_.nodes[static_cast<std::size_t>(b)].pos);
    poly = simplify_polyline(poly, tol_);
    if (poly.size() == 2) poly.clear();
    graph_.add_edge(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b), std::move(poly));
  }

  const Bitmap& bm_;
  double tol_;
  RoadGraph graph_;
  std::vector<int> node_of_;
  std::vector<bool> visited_;
  std::vector<int> degree_;
  std::set<std::pair<int, int>> edges_;
};

} // namespace

RoadGraph vectorize_skeleton(const SegMask& skeleton, double simplify_tol_px)
{
  if (skeleton.width != skeleton.height) throw DataError("skeleton mask must be square");
  if (!(simplify_tol_px >= 0.0)) throw DataError("simplification tolerance must be non-negative");
  if (!is_thin(skeleton)) throw DataError("mask is not a thin skeleton");
  const Bitmap bm(skeleton);
  return SkeletonTracer(bm, simplify_tol_px).run();
}

RoadGraph mask_to_graph(const SegMask& mask, const SkeletonParams& params)
{
  return vectorize_skeleton(thin_mask(mask), params.simplify_tol_px);
}

} // namespace patchgraph
