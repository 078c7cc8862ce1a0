#include "patchgraph/Synth.hpp"

#include "Random.hpp"
#include "patchgraph/Error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace patchgraph {

std::string_view style_name(NetworkStyle style)
{
  return style == NetworkStyle::JitteredGrid ? "jittered_grid" : "proximity_graph";
}

NetworkStyle parse_style(std::string_view name)
{
  if (name == "grid" || name == "jittered_grid") return NetworkStyle::JitteredGrid;
  if (name == "proximity" || name == "proximity_graph") return NetworkStyle::ProximityGraph;
  throw DataError("unknown network style '" + std::string(name) + "'");
}

void SynthParams::validate() const
{
  const PatchGrid grid(image_size, patch_size);
  if (!(min_sep >= 2.0 * patch_size)) throw DataError("min_sep must be at least twice the patch size");
  if (!(road_width >= 1.0) || !std::isfinite(road_width)) throw DataError("road width must be at least 1 px");
  if (!(2.0 * min_sep <= image_size)) throw DataError("image too small for min_sep");
  (void)grid;
}

void NoiseParams::validate() const
{
  if (!(sigma_p >= 0.0) || !(sigma_s >= 0.0) || !std::isfinite(sigma_p) || !std::isfinite(sigma_s)) {
    throw DataError("noise sigmas must be finite and non-negative");
  }
  if (!(p_drop >= 0.0 && p_drop <= 1.0) || !(p_add >= 0.0 && p_add <= 1.0)) {
    throw DataError("noise probabilities must lie in [0, 1]");
  }
}

namespace {

class DisjointSets {
public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

  std::size_t find(std::size_t x)
  {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  bool unite(std::size_t a, std::size_t b)
  {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent_[std::max(a, b)] = std::min(a, b);
    return true;
  }

private:
  std::vector<std::size_t> parent_;
};

// Nodes stay in the middle quarter of their patch, away from patch borders, so
// roads leaving a node at a wide angle never meet again in a neighbouring
// patch.
bool central(Point p, double patch_size)
{
  auto inner = [patch_size](double v) {
    const double local = v - std::floor(v / patch_size) * patch_size;
    return std::abs(local - patch_size / 2.0) <= patch_size / 8.0;
  };
  return inner(p.x) && inner(p.y);
}

Point to_central(Point p, double patch_size)
{
  auto pull = [patch_size](double v) {
    const double origin = std::floor(v / patch_size) * patch_size;
    return origin + patch_size / 2.0 + (v - origin - patch_size / 2.0) / 4.0;
  };
  return {pull(p.x), pull(p.y)};
}

template <typename T>
void shuffle(std::vector<T>& v, detail::Rng& rng)
{
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

RoadGraph jittered_grid(const SynthParams& params, detail::Rng& rng)
{
  const double spacing = 1.5 * params.min_sep;
  const double jitter = params.min_sep / 4.0;
  const double size = params.image_size;
  const auto count = static_cast<std::uint32_t>(std::floor((size - spacing) / spacing)) + 1;
  const double margin = (size - spacing * (count - 1)) / 2.0;

  RoadGraph g;
  g.image_size = params.image_size;
  g.width = params.road_width;
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < count; ++c) {
      Point p;
      do {
        const double radius = jitter * std::sqrt(rng.uniform());
        const double angle = 2.0 * std::numbers::pi * rng.uniform();
        p = {margin + c * spacing + radius * std::cos(angle), margin + r * spacing + radius * std::sin(angle)};
      } while (!central(p, params.patch_size));
      g.add_node(p);
    }
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> lattice;
  for (std::uint32_t r = 0; r < count; ++r) {
    for (std::uint32_t c = 0; c < count; ++c) {
      const std::uint32_t u = r * count + c;
      if (c + 1 < count) lattice.emplace_back(u, u + 1);
      if (r + 1 < count) lattice.emplace_back(u, u + count);
    }
  }
  shuffle(lattice, rng);
  DisjointSets sets(g.nodes.size());
  std::vector<bool> chosen(lattice.size(), false);
  for (std::size_t k = 0; k < lattice.size(); ++k) chosen[k] = sets.unite(lattice[k].first, lattice[k].second);
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    if (!chosen[k]) chosen[k] = rng.bernoulli(0.5);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    if (chosen[k]) edges.push_back(std::minmax(lattice[k].first, lattice[k].second));
  }
  std::sort(edges.begin(), edges.end());
  for (const auto& [a, b] : edges) g.add_edge(a, b);
  return g;
}

// Bridson's dart throwing inside [lo, hi]^2.
std::vector<Point> poisson_disk(double lo, double hi, double radius, double patch_size, detail::Rng& rng)
{
  constexpr int kAttempts = 30;
  const double cell = radius / std::numbers::sqrt2;
  const auto cells = static_cast<std::size_t>(std::ceil((hi - lo) / cell)) + 1;
  std::vector<std::int64_t> grid(cells * cells, -1);
  std::vector<Point> points;
  std::vector<std::size_t> active;

  auto cell_of = [&](Point p) {
    return std::pair{static_cast<std::size_t>((p.x - lo) / cell), static_cast<std::size_t>((p.y - lo) / cell)};
  };
  auto fits = [&](Point p) {
    if (p.x < lo || p.x > hi || p.y < lo || p.y > hi || !central(p, patch_size)) return false;
    const auto [cx, cy] = cell_of(p);
    for (std::size_t y = cy >= 2 ? cy - 2 : 0; y <= std::min(cells - 1, cy + 2); ++y) {
      for (std::size_t x = cx >= 2 ? cx - 2 : 0; x <= std::min(cells - 1, cx + 2); ++x) {
        const std::int64_t k = grid[y * cells + x];
        if (k >= 0 && distance(points[static_cast<std::size_t>(k)], p) < radius) return false;
      }
    }
    return true;
  };
  auto insert = [&](Point p) {
    const auto [cx, cy] = cell_of(p);
    grid[cy * cells + cx] = static_cast<std::int64_t>(points.size());
    active.push_back(points.size());
    points.push_back(p);
  };

  const Point first = to_central({rng.uniform(lo, hi), rng.uniform(lo, hi)}, patch_size);
  if (fits(first)) insert(first);
  while (!active.empty()) {
    const std::size_t slot = rng.below(active.size());
    const Point base = points[active[slot]];
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double r = radius * (1.0 + rng.uniform());
      const double angle = 2.0 * std::numbers::pi * rng.uniform();
      const Point p = to_central({base.x + r * std::cos(angle), base.y + r * std::sin(angle)}, patch_size);
      if (fits(p)) {
        insert(p);
        placed = true;
        break;
      }
    }
    if (!placed) {
      active[slot] = active.back();
      active.pop_back();
    }
  }
  return points;
}

RoadGraph proximity_graph(const SynthParams& params, detail::Rng& rng)
{
  const double margin = params.patch_size;
  const auto points = poisson_disk(margin, params.image_size - margin, params.min_sep, params.patch_size, rng);

  RoadGraph g;
  g.image_size = params.image_size;
  g.width = params.road_width;
  for (const Point& p : points) g.add_node(p);

  // Relative neighbourhood graph: u-v is kept unless some w is closer to
  // both ends than they are to each other. Every such w lies within d(u, v)
  // of u, so candidates come from a bucket grid.
  const double bucket = params.min_sep;
  const auto buckets = static_cast<std::size_t>(std::ceil(params.image_size / bucket)) + 1;
  std::vector<std::vector<std::uint32_t>> grid(buckets * buckets);
  auto bucket_of = [&](Point p) {
    return std::pair{static_cast<std::size_t>(p.x / bucket), static_cast<std::size_t>(p.y / bucket)};
  };
  for (std::uint32_t u = 0; u < points.size(); ++u) {
    const auto [bx, by] = bucket_of(points[u]);
    grid[by * buckets + bx].push_back(u);
  }
  auto near = [&](Point p, double reach) {
    std::vector<std::uint32_t> out;
    const auto span = static_cast<std::size_t>(std::ceil(reach / bucket));
    const auto [bx, by] = bucket_of(p);
    for (std::size_t y = by >= span ? by - span : 0; y <= std::min(buckets - 1, by + span); ++y) {
      for (std::size_t x = bx >= span ? bx - span : 0; x <= std::min(buckets - 1, bx + span); ++x) {
        for (std::uint32_t w : grid[y * buckets + x]) {
          if (distance(points[w], p) <= reach) out.push_back(w);
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };

  // Dart throwing leaves no large empty disks, so long edges cannot survive
  // the lune test.
  const double reach = 6.0 * params.min_sep;
  for (std::uint32_t u = 0; u < points.size(); ++u) {
    for (std::uint32_t v : near(points[u], reach)) {
      if (v <= u) continue;
      const double d = distance(points[u], points[v]);
      bool blocked = false;
      for (std::uint32_t w : near(points[u], d)) {
        if (w == u || w == v) continue;
        if (std::max(distance(points[u], points[w]), distance(points[v], points[w])) < d) {
          blocked = true;
          break;
        }
      }
      if (!blocked) g.add_edge(u, v);
    }
  }
  return g;
}

} // namespace

RoadGraph generate_network(const SynthParams& params)
{
  params.validate();
  detail::Rng rng(params.rng_seed);
  return params.style == NetworkStyle::JitteredGrid ? jittered_grid(params, rng) : proximity_graph(params, rng);
}

PslTensors perturb_psl(const PslTensors& t, const NoiseParams& noise)
{
  noise.validate();
  t.check_shape();
  PslTensors out = t;
  detail::Rng rng(noise.rng_seed);
  const PatchGrid& grid = t.grid;
  const std::size_t count = grid.patch_count();

  if (noise.sigma_p > 0.0) {
    for (float& p : out.p) {
      const double q = std::clamp(static_cast<double>(p), 0.05, 0.95);
      const double logit = std::log(q / (1.0 - q)) + noise.sigma_p * rng.normal();
      p = static_cast<float>(1.0 / (1.0 + std::exp(-logit)));
    }
  }

  if (noise.sigma_s > 0.0) {
    constexpr float kBelowOne = 1.0f - std::numeric_limits<float>::epsilon() / 2.0f;
    for (std::size_t i = 0; i < count; ++i) {
      if (t.p[i] != 1.0f) continue;
      for (std::size_t c = 0; c < 2; ++c) {
        float& s = out.s[2 * i + c];
        s = std::clamp(static_cast<float>(s + noise.sigma_s * rng.normal()), 0.0f, kBelowOne);
      }
    }
  }

  if (noise.p_drop > 0.0 || noise.p_add > 0.0) {
    for (PatchIndex i = 0; i < count; ++i) {
      if (t.p[i] < 0.5f) continue;
      for (int j = 4; j < 8; ++j) {
        const auto k = neighbor(i, j, grid);
        if (!k || t.p[*k] < 0.5f) continue;
        const bool linked = t.link(i, j) >= 0.5f && t.link(*k, opposite_direction(j)) >= 0.5f;
        const bool flip = rng.bernoulli(linked ? noise.p_drop : noise.p_add);
        if (!flip) continue;
        const float value = linked ? 0.0f : 1.0f;
        out.link(i, j) = value;
        out.link(*k, opposite_direction(j)) = value;
      }
    }
  }
  return out;
}

} // namespace patchgraph
