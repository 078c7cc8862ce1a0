#include "patchgraph/Metrics.hpp"

#include "patchgraph/Error.hpp"
#include "Random.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>

namespace patchgraph {

void MetricParams::validate() const
{
  if (!(buffer_px > 0.0)) throw DataError("buffer must be positive");
  if (!(inject_interval_px > 0.0)) throw DataError("injection interval must be positive");
  if (max_pairs == 0) throw DataError("max_pairs must be positive");
}

double iou(const SegMask& a, const SegMask& b)
{
  if (a.width != b.width || a.height != b.height) throw DataError("iou: mask size mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    const bool x = a.values[k] >= 0.5f;
    const bool y = b.values[k] >= 0.5f;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Square (Chebyshev) dilation by `radius`, done as two 1-D running windows.
std::vector<std::uint8_t> dilate(const SegMask& mask, std::uint32_t radius)
{
  const std::uint32_t w = mask.width;
  const std::uint32_t h = mask.height;
  std::vector<std::uint8_t> rows(mask.values.size(), 0);
  std::vector<std::uint32_t> prefix(std::max(w, h) + 1);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + (mask.road(x, y) ? 1 : 0);
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::uint32_t lo = x > radius ? x - radius : 0;
      const std::uint32_t hi = std::min(w, x + radius + 1);
      rows[std::size_t{y} * w + x] = prefix[hi] > prefix[lo] ? 1 : 0;
    }
  }
  std::vector<std::uint8_t> out(mask.values.size(), 0);
  for (std::uint32_t x = 0; x < w; ++x) {
    for (std::uint32_t y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + rows[std::size_t{y} * w + x];
    for (std::uint32_t y = 0; y < h; ++y) {
      const std::uint32_t lo = y > radius ? y - radius : 0;
      const std::uint32_t hi = std::min(h, y + radius + 1);
      out[std::size_t{y} * w + x] = prefix[hi] > prefix[lo] ? 1 : 0;
    }
  }
  return out;
}

std::size_t matched(const SegMask& from, const std::vector<std::uint8_t>& dilated_other)
{
  std::size_t hits = 0;
  for (std::size_t k = 0; k < from.values.size(); ++k) {
    if (from.values[k] >= 0.5f && dilated_other[k] != 0) ++hits;
  }
  return hits;
}

} // namespace

PixelScores pixel_f1(const RoadGraph& gt, const RoadGraph& pred, const MetricParams& params)
{
  params.validate();
  if (gt.image_size != pred.image_size) throw DataError("pixel_f1: graphs cover different image sizes");
  const SegMask gt_line = rasterize_centerline(gt, gt.image_size);
  const SegMask pred_line = rasterize_centerline(pred, pred.image_size);
  const std::size_t gt_count = gt_line.count_road();
  const std::size_t pred_count = pred_line.count_road();
  if (gt_count == 0 && pred_count == 0) return {1.0, 1.0, 1.0};
  if (gt_count == 0 || pred_count == 0) return {0.0, 0.0, 0.0};

  const auto radius = static_cast<std::uint32_t>(std::floor(params.buffer_px));
  PixelScores out;
  out.precision = static_cast<double>(matched(pred_line, dilate(gt_line, radius))) / static_cast<double>(pred_count);
  out.recall = static_cast<double>(matched(gt_line, dilate(pred_line, radius))) / static_cast<double>(gt_count);
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint32_t kMissing = std::numeric_limits<std::uint32_t>::max();

struct WeightedGraph {
  std::vector<Point> pts;
  std::vector<std::vector<std::pair<std::uint32_t, double>>> adj;

  std::uint32_t add_vertex(Point p)
  {
    pts.push_back(p);
    adj.emplace_back();
    return static_cast<std::uint32_t>(pts.size() - 1);
  }
  void connect(std::uint32_t a, std::uint32_t b, double w)
  {
    adj[a].emplace_back(b, w);
    adj[b].emplace_back(a, w);
  }
};

std::vector<double> shortest_paths(const WeightedGraph& g, std::uint32_t source)
{
  std::vector<double> dist(g.pts.size(), kInf);
  using Item = std::pair<double, std::uint32_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto& [v, w] : g.adj[u]) {
      if (d + w < dist[v]) {
        dist[v] = d + w;
        heap.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

// Single-target search. Edge weights are polyline lengths between the stored
// vertex positions, so the straight-line distance never overestimates.
class PathSearch {
public:
  explicit PathSearch(const WeightedGraph& g) : g_(g), dist_(g.pts.size(), kInf), stamp_(g.pts.size(), 0) {}

  double operator()(std::uint32_t source, std::uint32_t target)
  {
    if (source == target) return 0.0;
    ++generation_;
    using Item = std::pair<double, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    const Point goal = g_.pts[target];
    touch(source) = 0.0;
    heap.emplace(distance(g_.pts[source], goal), source);
    while (!heap.empty()) {
      const auto [f, u] = heap.top();
      heap.pop();
      const double d = dist_[u];
      if (u == target) return d;
      if (f > d + distance(g_.pts[u], goal)) continue;
      for (const auto& [v, w] : g_.adj[u]) {
        double& dv = touch(v);
        if (d + w < dv) {
          dv = d + w;
          heap.emplace(dv + distance(g_.pts[v], goal), v);
        }
      }
    }
    return kInf;
  }

private:
  double& touch(std::uint32_t v)
  {
    if (stamp_[v] != generation_) {
      stamp_[v] = generation_;
      dist_[v] = kInf;
    }
    return dist_[v];
  }

  const WeightedGraph& g_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
};

// Chain along one edge: (arc position, vertex) pairs sorted by position.
void link_chain(WeightedGraph& wg, std::vector<std::pair<double, std::uint32_t>>& chain)
{
  std::stable_sort(chain.begin(), chain.end(),
                   [](const auto& x, const auto& y) { return x.first < y.first; });
  for (std::size_t k = 1; k < chain.size(); ++k) {
    wg.connect(chain[k - 1].second, chain[k].second, chain[k].first - chain[k - 1].first);
  }
}

// Graph nodes followed by points injected every `interval` along each edge.
WeightedGraph inject_control_points(const RoadGraph& g, double interval)
{
  WeightedGraph wg;
  for (const RoadNode& n : g.nodes) wg.add_vertex(n.pos);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const std::vector<Point> poly = g.polyline(e);
    const double len = polyline_length(poly);
    std::vector<std::pair<double, std::uint32_t>> chain{{0.0, g.edges[e].a}};
    for (std::size_t k = 1; static_cast<double>(k) * interval < len; ++k) {
      const double s = static_cast<double>(k) * interval;
      chain.emplace_back(s, wg.add_vertex(point_at_arc_length(poly, s)));
    }
    chain.emplace_back(len, g.edges[e].b);
    link_chain(wg, chain);
  }
  return wg;
}

struct Segment {
  std::uint32_t edge;
  std::uint32_t index;
  Point a;
  Point b;
  double arc_start;
};

struct Snap {
  std::uint32_t edge = kMissing;
  double arc = 0.0;
  Point pos;
};

class SegmentIndex {
public:
  SegmentIndex(const RoadGraph& g, double buffer) : buffer_(buffer), cell_(std::max(buffer, 8.0))
  {
    for (std::uint32_t e = 0; e < g.edges.size(); ++e) {
      const std::vector<Point> poly = g.polyline(e);
      double arc = 0.0;
      for (std::uint32_t k = 1; k < poly.size(); ++k) {
        const auto id = static_cast<std::uint32_t>(segments_.size());
        segments_.push_back({e, k - 1, poly[k - 1], poly[k], arc});
        arc += distance(poly[k - 1], poly[k]);
        const auto [x0, x1] = std::minmax(poly[k - 1].x, poly[k].x);
        const auto [y0, y1] = std::minmax(poly[k - 1].y, poly[k].y);
        for (auto cy = key(y0 - buffer_); cy <= key(y1 + buffer_); ++cy) {
          for (auto cx = key(x0 - buffer_); cx <= key(x1 + buffer_); ++cx) buckets_[pack(cx, cy)].push_back(id);
        }
      }
    }
  }

  /// Nearest point of the indexed edges within the buffer; ties go to the
  /// lowest (edge, segment, position).
  Snap snap(Point p) const
  {
    const auto it = buckets_.find(pack(key(p.x), key(p.y)));
    if (it == buckets_.end()) return {};
    Snap best;
    double best_d = kInf;
    std::uint32_t best_seg = kMissing;
    double best_t = 0.0;
    for (std::uint32_t id : it->second) {
      const Segment& s = segments_[id];
      const Point ab = s.b - s.a;
      const double len2 = dot(ab, ab);
      const double t = len2 == 0.0 ? 0.0 : std::clamp(dot(p - s.a, ab) / len2, 0.0, 1.0);
      const double d = distance(p, s.a + ab * t);
      if (d > buffer_) continue;
      const bool better = d < best_d ||
                          (d == best_d && (s.edge < best.edge ||
                                           (s.edge == best.edge && (s.index < best_seg || (s.index == best_seg && t < best_t)))));
      if (better) {
        best_d = d;
        best = {s.edge, s.arc_start + t * std::sqrt(len2), s.a + ab * t};
        best_seg = s.index;
        best_t = t;
      }
    }
    return best;
  }

private:
  std::int64_t key(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::uint64_t pack(std::int64_t cx, std::int64_t cy)
  {
    return (static_cast<std::uint64_t>(cx + (1 << 30)) << 32) ^ static_cast<std::uint64_t>(cy + (1 << 30));
  }

  double buffer_;
  double cell_;
  std::vector<Segment> segments_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x)
{
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

// Unordered pairs of control points sharing a connected component: all of
// them, or max_pairs drawn uniformly without replacement.
std::vector<std::pair<std::uint32_t, std::uint32_t>> control_pairs(const WeightedGraph& wg,
                                                                   const MetricParams& params)
{
  const auto count = static_cast<std::uint32_t>(wg.pts.size());
  std::vector<std::uint32_t> parent(count);
  std::iota(parent.begin(), parent.end(), 0u);
  for (std::uint32_t u = 0; u < count; ++u) {
    for (const auto& [v, w] : wg.adj[u]) parent[find_root(parent, u)] = find_root(parent, v);
  }
  std::map<std::uint32_t, std::vector<std::uint32_t>> members;
  for (std::uint32_t u = 0; u < count; ++u) members[find_root(parent, u)].push_back(u);

  std::vector<const std::vector<std::uint32_t>*> comps;
  std::vector<std::uint64_t> offsets{0};
  for (const auto& [root, list] : members) {
    if (list.size() < 2) continue;
    comps.push_back(&list);
    offsets.push_back(offsets.back() + std::uint64_t{list.size()} * (list.size() - 1) / 2);
  }
  const std::uint64_t total = offsets.back();

  auto unrank = [&](std::uint64_t r) {
    const auto c = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), r) - offsets.begin() - 1);
    const auto& list = *comps[c];
    std::uint64_t rem = r - offsets[c];
    std::uint64_t row = 0;
    while (rem >= list.size() - 1 - row) {
      rem -= list.size() - 1 - row;
      ++row;
    }
    return std::pair{list[row], list[row + 1 + rem]};
  };

  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  if (total <= params.max_pairs) {
    for (std::uint64_t r = 0; r < total; ++r) pairs.push_back(unrank(r));
  } else {
    // Floyd's sampling of max_pairs distinct ranks.
    detail::Rng rng(params.rng_seed);
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = total - params.max_pairs; j < total; ++j) {
      const std::uint64_t t = rng.below(j + 1);
      if (!chosen.insert(t).second) chosen.insert(j);
    }
    for (std::uint64_t r : chosen) pairs.push_back(unrank(r));
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

bool has_edges(const RoadGraph& g) { return !g.edges.empty(); }

} // namespace

double apls_directional(const RoadGraph& from, const RoadGraph& onto, const MetricParams& params)
{
  params.validate();
  if (!has_edges(from)) return has_edges(onto) ? 0.0 : 1.0;
  if (!has_edges(onto)) return 0.0;

  const WeightedGraph source = inject_control_points(from, params.inject_interval_px);
  const auto control_count = static_cast<std::uint32_t>(source.pts.size());

  // Target graph: nodes of `onto` plus one vertex per snapped control point.
  const SegmentIndex index(onto, params.buffer_px);
  WeightedGraph target;
  for (const RoadNode& n : onto.nodes) target.add_vertex(n.pos);
  std::vector<std::vector<std::pair<double, std::uint32_t>>> chains(onto.edges.size());
  std::vector<std::uint32_t> snapped(control_count, kMissing);
  for (std::uint32_t c = 0; c < control_count; ++c) {
    const Snap s = index.snap(source.pts[c]);
    if (s.edge == kMissing) continue;
    snapped[c] = target.add_vertex(s.pos);
    chains[s.edge].emplace_back(s.arc, snapped[c]);
  }
  for (std::uint32_t e = 0; e < onto.edges.size(); ++e) {
    auto& chain = chains[e];
    chain.insert(chain.begin(), {0.0, onto.edges[e].a});
    chain.emplace_back(polyline_length(onto.polyline(e)), onto.edges[e].b);
    link_chain(target, chain);
  }

  const auto pairs = control_pairs(source, params);
  // Rounding noise on otherwise identical path lengths is not a difference.
  constexpr double kRelTol = 1e-10;
  constexpr std::size_t kTargetedLimit = 4;
  PathSearch source_search(source);
  PathSearch target_search(target);
  double sum = 0.0;
  std::size_t terms = 0;
  std::size_t k = 0;
  while (k < pairs.size()) {
    const std::uint32_t i = pairs[k].first;
    std::size_t end = k;
    while (end < pairs.size() && pairs[end].first == i) ++end;
    // Few destinations: goal-directed searches; many: one full sweep.
    const bool targeted = end - k <= kTargetedLimit;
    std::vector<double> d_source;
    std::vector<double> d_target;
    if (!targeted) {
      d_source = shortest_paths(source, i);
      if (snapped[i] != kMissing) d_target = shortest_paths(target, snapped[i]);
    }
    for (; k < end; ++k) {
      const std::uint32_t j = pairs[k].second;
      const double len = targeted ? source_search(i, j) : d_source[j];
      if (!(len > 0.0) || len == kInf) continue;
      ++terms;
      if (snapped[i] == kMissing || snapped[j] == kMissing) continue;
      const double other = targeted ? target_search(snapped[i], snapped[j]) : d_target[snapped[j]];
      if (other == kInf) continue;
      double diff = std::abs(len - other);
      if (diff <= kRelTol * len) diff = 0.0;
      sum += 1.0 - std::min(1.0, diff / len);
    }
  }
  return terms == 0 ? 1.0 : sum / static_cast<double>(terms);
}

double apls(const RoadGraph& gt, const RoadGraph& pred, const MetricParams& params)
{
  params.validate();
  if (!has_edges(gt) && !has_edges(pred)) return 1.0;
  if (!has_edges(gt) || !has_edges(pred)) return 0.0;
  const double forward = apls_directional(gt, pred, params);
  const double backward = apls_directional(pred, gt, params);
  if (forward + backward == 0.0) return 0.0;
  return 2.0 * forward * backward / (forward + backward);
}

EvalReport eval_all(const RoadGraph& gt_graph, const RoadGraph& pred_graph, const SegMask* gt_mask,
                    const SegMask* pred_mask, const MetricParams& params)
{
  EvalReport report;
  report.apls = apls(gt_graph, pred_graph, params);
  report.pf1 = pixel_f1(gt_graph, pred_graph, params);
  if (gt_mask && pred_mask) report.iou = iou(*gt_mask, *pred_mask);
  return report;
}

} // namespace patchgraph
