#pragma once

#include "patchgraph/Geometry.hpp"

#include <cstdint>
#include <optional>

namespace patchgraph {

struct MetricParams {
  double buffer_px = 4.0;           // pixel-F1 match radius and APLS snap radius
  double inject_interval_px = 50.0; // APLS control point spacing along edges
  std::size_t max_pairs = 1000;     // APLS pairs scored per direction
  std::uint64_t rng_seed = 0;       // pair sampling when max_pairs binds

  void validate() const;
};

/// Intersection over union of the road pixels (>= 0.5); 1 when both are empty.
double iou(const SegMask& a, const SegMask& b);

struct PixelScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Buffer-relaxed centerline F1: a centerline pixel matches if a pixel of the
/// other centerline lies within Chebyshev distance buffer_px.
PixelScores pixel_f1(const RoadGraph& gt, const RoadGraph& pred, const MetricParams& params = {});

/// One direction of APLS: control points of `from` are snapped onto the edges
/// of `onto` and path lengths between control point pairs are compared.
double apls_directional(const RoadGraph& from, const RoadGraph& onto, const MetricParams& params = {});

/// Harmonic mean of both APLS directions. Graphs without edges count as
/// empty: both empty scores 1, exactly one empty scores 0.
double apls(const RoadGraph& gt, const RoadGraph& pred, const MetricParams& params = {});

struct EvalReport {
  double apls = 0.0;
  PixelScores pf1;
  std::optional<double> iou;
};

/// IoU is reported only when both masks are given.
EvalReport eval_all(const RoadGraph& gt_graph, const RoadGraph& pred_graph, const SegMask* gt_mask,
                    const SegMask* pred_mask, const MetricParams& params = {});

} // namespace patchgraph
