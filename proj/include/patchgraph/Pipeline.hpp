#pragma once

#include "patchgraph/GraphOpt.hpp"
#include "patchgraph/Metrics.hpp"
#include "patchgraph/PslCodec.hpp"
#include "patchgraph/Skeleton.hpp"
#include "patchgraph/Synth.hpp"

#include <optional>

namespace patchgraph {

struct RoundTripConfig {
  SynthParams synth;
  std::optional<NoiseParams> noise;
  DecodeParams decode;
  OptimizeParams opt;
  MetricParams metrics;
  bool eval_raw = true; // also score the unoptimized decode
  bool with_baseline = false;
  SkeletonParams skeleton;
};

struct StageTimings {
  double synth_s = 0.0;
  double encode_s = 0.0;
  double perturb_s = 0.0;
  double decode_s = 0.0;
  double optimize_s = 0.0;
  double eval_s = 0.0;
  double baseline_s = 0.0;
};

struct RoundTripResult {
  RoadGraph gt;
  PslTensors tensors; // after noise, if any
  RoadGraph decoded;
  RoadGraph optimized;
  EvalReport report;     // optimized vs ground truth
  std::optional<EvalReport> raw_report; // decoded vs ground truth
  /// Patch pairs of the optimized graph equal the ground-truth link pairs.
  bool exact_recovery = false;
  std::optional<EvalReport> baseline; // skeleton of the rasterized ground truth
  StageTimings timings;
};

/// synth -> encode -> [perturb] -> decode -> optimize -> eval.
RoundTripResult run_roundtrip(const RoundTripConfig& config);

/// Decode then optimize; the work timed by the speed benchmark.
RoadGraph decode_and_optimize(const PslTensors& t, const DecodeParams& decode, const OptimizeParams& opt);

} // namespace patchgraph
