#include "patchgraph/Pipeline.hpp"

#include <chrono>

namespace patchgraph {
namespace {

class Stopwatch {
public:
  double lap()
  {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

} // namespace

RoadGraph decode_and_optimize(const PslTensors& t, const DecodeParams& decode, const OptimizeParams& opt)
{
  return optimize(decode_graph(t, decode), t.grid, opt);
}

RoundTripResult run_roundtrip(const RoundTripConfig& config)
{
  config.decode.validate();
  config.metrics.validate();
  RoundTripResult r;
  Stopwatch clock;

  r.gt = generate_network(config.synth);
  r.timings.synth_s = clock.lap();

  const PatchGrid grid(config.synth.image_size, config.synth.patch_size);
  const PslTensors clean = encode_psl(r.gt, grid);
  r.timings.encode_s = clock.lap();

  r.tensors = config.noise ? perturb_psl(clean, *config.noise) : clean;
  r.timings.perturb_s = clock.lap();

  r.decoded = decode_graph(r.tensors, config.decode);
  r.timings.decode_s = clock.lap();

  r.optimized = optimize(r.decoded, grid, config.opt);
  r.timings.optimize_s = clock.lap();

  r.report = eval_all(r.gt, r.optimized, nullptr, nullptr, config.metrics);
  if (config.eval_raw) r.raw_report = eval_all(r.gt, r.decoded, nullptr, nullptr, config.metrics);
  r.exact_recovery = edge_patch_pairs(r.optimized) == link_pairs(clean);
  r.timings.eval_s = clock.lap();

  if (config.with_baseline) {
    const SegMask mask = rasterize_graph(r.gt, r.gt.width, r.gt.image_size);
    const RoadGraph skeleton = mask_to_graph(mask, config.skeleton);
    r.baseline = eval_all(r.gt, skeleton, nullptr, nullptr, config.metrics);
    r.timings.baseline_s = clock.lap();
  }
  return r;
}

} // namespace patchgraph
