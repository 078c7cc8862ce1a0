#pragma once

#include "patchgraph/Geometry.hpp"

namespace patchgraph {

// Refinement of patch-wise graphs. Every node must carry a distinct patch
// index (as produced by decode_graph); DataError otherwise. Node positions
// are never changed, only edges are added or removed.

struct OptimizeParams {
  /// Adjacent endpoints already joined by a path of at most this many hops
  /// are left alone.
  int hop_guard = 5;
};

/// Joins nodes of degree <= 1 sitting in 8-adjacent patches unless they are
/// already connected within hop_guard hops.
RoadGraph connect_endpoints(const RoadGraph& g, const PatchGrid& grid, int hop_guard = 5);

/// Breaks every triangle of mutually adjacent patches by dropping its
/// diagonal link.
RoadGraph remove_triangles(const RoadGraph& g, const PatchGrid& grid);

/// Breaks every chordless 4-cycle of adjacent patches by dropping its longest
/// link (ties: diagonal link first, then the smallest patch pair).
RoadGraph remove_quadrilaterals(const RoadGraph& g, const PatchGrid& grid);

/// connect_endpoints, remove_triangles, remove_quadrilaterals, repeated until
/// the edge set stops changing. The result is a fixpoint: optimizing it
/// again returns it unchanged.
RoadGraph optimize(const RoadGraph& g, const PatchGrid& grid, const OptimizeParams& params = {});

} // namespace patchgraph
