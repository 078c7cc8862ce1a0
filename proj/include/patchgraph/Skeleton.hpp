#pragma once

#include "patchgraph/Geometry.hpp"

#include <span>
#include <vector>

namespace patchgraph {

/// Topology-preserving thinning of the road pixels (>= 0.5) down to a
/// one-pixel, 8-connected skeleton. Two directional subcycles per pass;
/// endpoints are kept, so branches do not shrink.
SegMask thin_mask(const SegMask& mask);

/// True if no foreground pixel can be removed by thinning (every
/// non-endpoint pixel is needed for connectivity).
bool is_thin(const SegMask& mask);

/// Recursive max-deviation simplification; keeps both endpoints and every
/// dropped point stays within tol of the result.
std::vector<Point> simplify_polyline(std::span<const Point> poly, double tol);

/// Skeleton to graph: pixels with one neighbour become endpoint nodes,
/// 8-connected clusters of pixels with three or more neighbours become one
/// junction node at their centroid, pixel chains between nodes become edges.
/// Isolated pixels are dropped. The mask must be square and thin
/// (DataError otherwise).
RoadGraph vectorize_skeleton(const SegMask& skeleton, double simplify_tol_px = 2.0);

struct SkeletonParams {
  double simplify_tol_px = 2.0;
};

/// thin_mask followed by vectorize_skeleton.
RoadGraph mask_to_graph(const SegMask& mask, const SkeletonParams& params = {});

} // namespace patchgraph
