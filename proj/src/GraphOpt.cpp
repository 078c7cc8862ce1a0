#include "patchgraph/GraphOpt.hpp"

#include "patchgraph/Error.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>

namespace patchgraph {
namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Mutable view of a patch-annotated graph with O(degree) edge lookups.
class LinkGraph {
public:
  LinkGraph(const RoadGraph& g, const PatchGrid& grid) : source_(g), grid_(grid)
  {
    node_at_.assign(grid.patch_count(), kNone);
    for (std::uint32_t u = 0; u < g.nodes.size(); ++u) {
      const auto& patch = g.nodes[u].patch;
      if (!patch) throw DataError("node " + std::to_string(u) + " has no patch annotation");
      if (*patch >= grid.patch_count()) throw DataError("node " + std::to_string(u) + " has an out-of-grid patch");
      if (node_at_[*patch] != kNone) throw DataError("patch " + std::to_string(*patch) + " holds two nodes");
      node_at_[*patch] = u;
    }
    adj_.resize(g.nodes.size());
    for (const RoadEdge& e : g.edges) {
      if (e.a >= g.nodes.size() || e.b >= g.nodes.size() || e.a == e.b) throw DataError("malformed edge");
      if (has_edge(e.a, e.b)) throw DataError("duplicate edge");
      link(e.a, e.b, e.poly);
    }
    stamp_.assign(g.nodes.size(), 0);
  }

  std::size_t node_count() const { return adj_.size(); }
  std::uint32_t node_at(PatchIndex i) const { return node_at_[i]; }
  PatchIndex patch(std::uint32_t u) const { return *source_.nodes[u].patch; }
  Point pos(std::uint32_t u) const { return source_.nodes[u].pos; }
  std::size_t degree(std::uint32_t u) const { return adj_[u].size(); }
  const PatchGrid& grid() const { return grid_; }

  bool has_edge(std::uint32_t u, std::uint32_t v) const
  {
    return std::any_of(adj_[u].begin(), adj_[u].end(), [v](const auto& a) { return a.first == v; });
  }

  bool adjacent(std::uint32_t u, std::uint32_t v) const { return patches_adjacent(patch(u), patch(v), grid_); }

  /// Neighbours of u linked through an 8-adjacent patch.
  std::vector<std::uint32_t> patch_neighbors(std::uint32_t u) const
  {
    std::vector<std::uint32_t> out;
    for (const auto& [v, e] : adj_[u]) {
      if (adjacent(u, v)) out.push_back(v);
    }
    std::sort(out.begin(), out.end(), [this](std::uint32_t a, std::uint32_t b) { return patch(a) < patch(b); });
    return out;
  }

  void add_edge(std::uint32_t u, std::uint32_t v) { link(u, v, {}); }

  void remove_edge(std::uint32_t u, std::uint32_t v)
  {
    const auto it = std::find_if(adj_[u].begin(), adj_[u].end(), [v](const auto& a) { return a.first == v; });
    if (it == adj_[u].end()) return;
    links_[it->second].alive = false;
    adj_[u].erase(it);
    std::erase_if(adj_[v], [u](const auto& a) { return a.first == u; });
  }

  /// True if v is reachable from u in at most max_hops edges.
  bool within_hops(std::uint32_t u, std::uint32_t v, int max_hops)
  {
    ++generation_;
    std::vector<std::uint32_t> frontier{u};
    stamp_[u] = generation_;
    for (int hop = 0; hop < max_hops && !frontier.empty(); ++hop) {
      std::vector<std::uint32_t> next;
      for (std::uint32_t x : frontier) {
        for (const auto& [y, e] : adj_[x]) {
          if (y == v) return true;
          if (stamp_[y] != generation_) {
            stamp_[y] = generation_;
            next.push_back(y);
          }
        }
      }
      frontier = std::move(next);
    }
    return false;
  }

  /// Surviving original edges in their original order, then added ones.
  RoadGraph to_graph() const
  {
    RoadGraph out;
    out.image_size = source_.image_size;
    out.width = source_.width;
    out.nodes = source_.nodes;
    for (const Link& l : links_) {
      if (l.alive) out.edges.push_back({l.a, l.b, l.poly});
    }
    return out;
  }

private:
  struct Link {
    std::uint32_t a;
    std::uint32_t b;
    std::vector<Point> poly;
    bool alive;
  };

  void link(std::uint32_t u, std::uint32_t v, std::vector<Point> poly)
  {
    const auto id = static_cast<std::uint32_t>(links_.size());
    links_.push_back({u, v, std::move(poly), true});
    adj_[u].emplace_back(v, id);
    adj_[v].emplace_back(u, id);
  }

  const RoadGraph& source_;
  PatchGrid grid_;
  std::vector<std::uint32_t> node_at_;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj_;
  std::vector<Link> links_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t generation_ = 0;
};

std::size_t removal_cap(const PatchGrid& grid) { return 10 * grid.patch_count(); }

void check_cap(std::size_t removals, const PatchGrid& grid)
{
  if (removals > removal_cap(grid)) throw std::runtime_error("graph optimization exceeded its iteration cap");
}

bool same_edges(const RoadGraph& a, const RoadGraph& b)
{
  return std::equal(a.edges.begin(), a.edges.end(), b.edges.begin(), b.edges.end(),
                    [](const RoadEdge& x, const RoadEdge& y) { return x.a == y.a && x.b == y.b; });
}

} // namespace

RoadGraph connect_endpoints(const RoadGraph& g, const PatchGrid& grid, int hop_guard)
{
  LinkGraph lg(g, grid);
  bool added = true;
  while (added) {
    added = false;
    for (PatchIndex i = 0; i < grid.patch_count(); ++i) {
      const std::uint32_t u = lg.node_at(i);
      if (u == kNone || lg.degree(u) > 1) continue;
      for (int j = 4; j < 8; ++j) {
        const auto k = neighbor(i, j, grid);
        if (!k) continue;
        const std::uint32_t v = lg.node_at(*k);
        if (v == kNone || lg.degree(u) > 1 || lg.degree(v) > 1 || lg.has_edge(u, v)) continue;
        if (lg.within_hops(u, v, hop_guard)) continue;
        lg.add_edge(u, v);
        added = true;
      }
    }
  }
  return lg.to_graph();
}

RoadGraph remove_triangles(const RoadGraph& g, const PatchGrid& grid)
{
  LinkGraph lg(g, grid);
  using Triangle = std::array<std::uint32_t, 3>; // nodes in ascending patch order
  std::vector<std::tuple<PatchIndex, PatchIndex, PatchIndex, Triangle>> triangles;
  for (std::uint32_t u = 0; u < lg.node_count(); ++u) {
    const auto nbrs = lg.patch_neighbors(u);
    for (std::size_t x = 0; x < nbrs.size(); ++x) {
      const std::uint32_t v = nbrs[x];
      if (lg.patch(v) < lg.patch(u)) continue;
      for (std::size_t y = x + 1; y < nbrs.size(); ++y) {
        const std::uint32_t w = nbrs[y];
        if (lg.adjacent(v, w) && lg.has_edge(v, w)) {
          triangles.emplace_back(lg.patch(u), lg.patch(v), lg.patch(w), Triangle{u, v, w});
        }
      }
    }
  }
  // Removing edges never creates a triangle, so one ordered sweep reaches
  // the same fixpoint as rescanning after every removal.
  std::sort(triangles.begin(), triangles.end());
  std::size_t removals = 0;
  for (const auto& [pa, pb, pc, tri] : triangles) {
    const auto [u, v, w] = tri;
    if (!lg.has_edge(u, v) || !lg.has_edge(u, w) || !lg.has_edge(v, w)) continue;
    if (patches_diagonal(pa, pb, grid)) {
      lg.remove_edge(u, v);
    } else if (patches_diagonal(pa, pc, grid)) {
      lg.remove_edge(u, w);
    } else {
      lg.remove_edge(v, w);
    }
    check_cap(++removals, grid);
  }
  return lg.to_graph();
}

RoadGraph remove_quadrilaterals(const RoadGraph& g, const PatchGrid& grid)
{
  LinkGraph lg(g, grid);
  // Cycle a-b-c-d-a with a the lowest patch and b before d.
  using Quad = std::array<std::uint32_t, 4>;
  std::vector<std::pair<std::array<PatchIndex, 4>, Quad>> cycles;
  for (std::uint32_t a = 0; a < lg.node_count(); ++a) {
    const auto nbrs = lg.patch_neighbors(a);
    for (std::size_t x = 0; x < nbrs.size(); ++x) {
      const std::uint32_t b = nbrs[x];
      if (lg.patch(b) < lg.patch(a)) continue;
      for (std::size_t y = x + 1; y < nbrs.size(); ++y) {
        const std::uint32_t d = nbrs[y];
        for (std::uint32_t c : lg.patch_neighbors(b)) {
          if (c == a || c == d || lg.patch(c) < lg.patch(a)) continue;
          if (!lg.has_edge(c, d) || !lg.adjacent(c, d)) continue;
          cycles.push_back({{lg.patch(a), lg.patch(b), lg.patch(c), lg.patch(d)}, Quad{a, b, c, d}});
        }
      }
    }
  }
  std::sort(cycles.begin(), cycles.end());

  auto alive = [&lg](const Quad& q) {
    return lg.has_edge(q[0], q[1]) && lg.has_edge(q[1], q[2]) && lg.has_edge(q[2], q[3]) &&
           lg.has_edge(q[3], q[0]);
  };
  auto chordless = [&lg](const Quad& q) { return !lg.has_edge(q[0], q[2]) && !lg.has_edge(q[1], q[3]); };

  // A removal can turn a chorded cycle earlier in the order into a chordless
  // one, so the scan restarts after every removal.
  std::size_t removals = 0;
  for (bool progress = true; progress;) {
    progress = false;
    for (const auto& [patches, q] : cycles) {
      if (!alive(q) || !chordless(q)) continue;
      std::pair<std::uint32_t, std::uint32_t> worst{kNone, kNone};
      double worst_len = -1.0;
      bool worst_diag = false;
      PatchPair worst_key{};
      for (int k = 0; k < 4; ++k) {
        const std::uint32_t u = q[static_cast<std::size_t>(k)];
        const std::uint32_t v = q[static_cast<std::size_t>((k + 1) % 4)];
        const double len = distance(lg.pos(u), lg.pos(v));
        const bool diag = patches_diagonal(lg.patch(u), lg.patch(v), grid);
        const PatchPair key = std::minmax(lg.patch(u), lg.patch(v));
        constexpr double kTieTol = 1e-9;
        bool better = false;
        if (worst.first == kNone || len > worst_len + kTieTol) {
          better = true;
        } else if (len >= worst_len - kTieTol) {
          better = (diag && !worst_diag) || (diag == worst_diag && key < worst_key);
        }
        if (better) {
          worst = {u, v};
          worst_len = len;
          worst_diag = diag;
          worst_key = key;
        }
      }
      lg.remove_edge(worst.first, worst.second);
      check_cap(++removals, grid);
      progress = true;
      break;
    }
  }
  return lg.to_graph();
}

RoadGraph optimize(const RoadGraph& g, const PatchGrid& grid, const OptimizeParams& params)
{
  constexpr int kMaxRounds = 64;
  RoadGraph current = g;
  for (int round = 0; round < kMaxRounds; ++round) {
    RoadGraph next =
        remove_quadrilaterals(remove_triangles(connect_endpoints(current, grid, params.hop_guard), grid), grid);
    if (same_edges(next, current)) return next;
    current = std::move(next);
  }
  throw std::runtime_error("graph optimization did not reach a fixpoint; try a larger hop guard");
}

} // namespace patchgraph
