#pragma once

#include "patchgraph/Geometry.hpp"

#include <cstddef>
#include <vector>

namespace oracle {

// Exhaustive enumeration over node tuples of a patch-annotated graph.
class PatchCycles {
public:
  PatchCycles(const patchgraph::RoadGraph& g, const patchgraph::PatchGrid& grid) : n_(g.nodes.size()), linked_(n_ * n_, false)
  {
    for (const auto& e : g.edges) {
      if (patchgraph::patches_adjacent(*g.nodes[e.a].patch, *g.nodes[e.b].patch, grid)) {
        linked_[e.a * n_ + e.b] = linked_[e.b * n_ + e.a] = true;
      }
    }
    neighbours_.resize(n_);
    for (std::size_t u = 0; u < n_; ++u) {
      for (std::size_t v = 0; v < n_; ++v) {
        if (linked_[u * n_ + v]) neighbours_[u].push_back(v);
      }
    }
  }

  /// 3-cycles of links between 8-adjacent patches.
  std::size_t triangles() const
  {
    std::size_t count = 0;
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b : neighbours_[a]) {
        if (b <= a) continue;
        for (std::size_t c : neighbours_[b]) {
          if (c > b && link(a, c)) ++count;
        }
      }
    }
    return count;
  }

  /// Chordless 4-cycles of links between 8-adjacent patches. Chords are
  /// looked up among all edges, adjacent or not.
  std::size_t quadrilaterals(const patchgraph::RoadGraph& g) const
  {
    std::vector<bool> any(n_ * n_, false);
    for (const auto& e : g.edges) any[e.a * n_ + e.b] = any[e.b * n_ + e.a] = true;
    std::size_t count = 0;
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b : neighbours_[a]) {
        if (b <= a) continue;
        for (std::size_t c : neighbours_[b]) {
          if (c <= a || c == b) continue;
          for (std::size_t d : neighbours_[c]) {
            if (d <= b || d == a || !link(d, a)) continue;
            if (any[a * n_ + c] || any[b * n_ + d]) continue;
            ++count;
          }
        }
      }
    }
    return count;
  }

private:
  bool link(std::size_t u, std::size_t v) const { return linked_[u * n_ + v]; }

  std::size_t n_;
  std::vector<bool> linked_;
  std::vector<std::vector<std::size_t>> neighbours_;
};

} // namespace oracle
