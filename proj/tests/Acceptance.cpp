// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include "oracles/Apls.hpp"
#include "oracles/Cycles.hpp"
#include "oracles/SmallGraphs.hpp"
#include "patchgraph/GraphIo.hpp"
#include "patchgraph/GraphOpt.hpp"
#include "patchgraph/Losses.hpp"
#include "patchgraph/Metrics.hpp"
#include "patchgraph/Pipeline.hpp"
#include "patchgraph/PslCodec.hpp"
#include "patchgraph/Synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

using namespace patchgraph;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail)
{
  std::printf("%s C%d %s: %s\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* format, auto... args)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

NetworkStyle style_for(std::uint64_t seed)
{
  return seed % 2 ? NetworkStyle::ProximityGraph : NetworkStyle::JitteredGrid;
}

// Zero patch-triangles and quadrilaterals, and a second optimize is a no-op.
struct OptCheck {
  std::size_t scenes = 0;
  std::size_t cyclic = 0;
  std::size_t unstable = 0;

  void add(const RoadGraph& optimized, const PatchGrid& grid)
  {
    ++scenes;
    const oracle::PatchCycles cycles(optimized, grid);
    if (cycles.triangles() != 0 || cycles.quadrilaterals(optimized) != 0) ++cyclic;
    if (graph_to_json(optimize(optimized, grid)) != graph_to_json(optimized)) ++unstable;
  }
};

void check_round_trip(std::vector<RoundTripResult>& scenes)
{
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RoundTripConfig c;
    c.synth.rng_seed = seed;
    c.synth.style = style_for(seed);
    c.eval_raw = false;
    scenes.push_back(run_roundtrip(c));
  }
  const double elapsed = seconds_since(start);
  int exact = 0;
  double min_apls = 1.0;
  double min_f1 = 1.0;
  for (const auto& r : scenes) {
    exact += r.exact_recovery ? 1 : 0;
    min_apls = std::min(min_apls, r.report.apls);
    min_f1 = std::min(min_f1, r.report.pf1.f1);
  }
  const bool ok = exact >= 99 && min_apls >= 0.95 && min_f1 >= 0.98 && elapsed < 60.0;
  report(1, ok, "round-trip fidelity",
         fmt("exact %d/100, min APLS %.4f, min pixel-F1 %.4f, %.1f s", exact, min_apls, min_f1, elapsed));
}

void check_losses()
{
  bool ok = true;
  std::string detail;
  auto near = [&](const char* name, double got, double want, double tol) {
    if (std::abs(got - want) > tol) {
      ok = false;
      detail += fmt("%s=%.9g (want %.9g) ", name, got, want);
    }
  };

  const std::vector<float> one{1.0f};
  near("bce_half", loss_p(one, std::vector<float>{0.5f}), -std::log(0.5), 1e-6);
  near("bce_pair", loss_p(std::vector<float>{1.0f, 0.0f}, std::vector<float>{0.9f, 0.1f}), -2.0 * std::log(0.9), 1e-6);

  PslTensors single(PatchGrid(16, 16));
  single.p[0] = 1.0f;
  single.s = {0.5f, 0.5f};
  single.link(0, 4) = 1.0f;
  const auto omega1 = road_patches(single.p);
  near("mae", loss_s(single.s, std::vector<float>{0.25f, 0.75f}, omega1), 0.5, 1e-6);
  std::vector<float> l_half = single.l;
  l_half[4] = 0.5f;
  near("link", loss_l(single.l, l_half, omega1), -std::log(0.5), 1e-6);

  SegMask all(4, 4);
  SegMask half(4, 4);
  for (float& v : all.values) v = 1.0f;
  for (float& v : half.values) v = 0.5f;
  near("seg", loss_seg(all, half), -std::log(0.5) + 1.0 - (2.0 * 8.0 + 1e-7) / (16.0 + 8.0 + 1e-7), 1e-6);
  const LossBreakdown joint = combine_losses(0.2, 0.5, 0.7, 0.3, LossWeights{});
  near("graph", joint.l_graph, 1.3, 1e-12);
  near("total", joint.total, 1.6, 1e-12);

  // Three road patches on a 3x3 grid.
  PslTensors gt(PatchGrid(48, 16));
  for (PatchIndex i : {0u, 1u, 4u}) {
    gt.p[i] = 1.0f;
    gt.s[2 * i] = 0.5f;
    gt.s[2 * i + 1] = 0.25f;
  }
  gt.link(0, 4) = gt.link(1, 3) = gt.link(1, 6) = gt.link(4, 1) = 1.0f;
  SegMask mask(48, 48);
  for (std::uint32_t x = 0; x < 30; ++x) mask.at(x, 8) = 1.0f;
  const LossBreakdown zero = loss_joint(gt, mask, gt, mask);
  for (double v : {zero.l_p, zero.l_s, zero.l_l, zero.l_seg, zero.total}) {
    if (!(v >= 0.0 && v <= 1e-5)) {
      ok = false;
      detail += fmt("zero-at-gt %.3g ", v);
    }
  }

  const auto omega = road_patches(gt.p);
  PslTensors pre = gt;
  pre.s[0] = 0.1f;
  pre.link(0, 7) = 0.3f;
  const double ls = loss_s(gt.s, pre.s, omega);
  const double ll = loss_l(gt.l, pre.l, omega);
  oracle::SmallGraphs noise(5);
  bool partial = true;
  for (int round = 0; round < 100; ++round) {
    PslTensors other = pre;
    for (PatchIndex i = 0; i < 9; ++i) {
      if (gt.p[i] == 1.0f) continue;
      for (int k = 0; k < 2; ++k) other.s[2 * i + k] = static_cast<float>(noise.uniform(0.0, 1.0));
      for (int j = 0; j < 8; ++j) other.link(i, j) = static_cast<float>(noise.uniform(0.0, 1.0));
    }
    partial = partial && loss_s(gt.s, other.s, omega) == ls && loss_l(gt.l, other.l, omega) == ll;
  }
  if (!partial) {
    ok = false;
    detail += "partiality broken ";
  }
  report(2, ok, "loss correctness", ok ? "hand values within 1e-6, zero at GT, partiality exact" : detail);
}

void check_apls_oracle()
{
  oracle::SmallGraphs gen(31337);
  MetricParams params;
  params.max_pairs = 1'000'000;
  double worst = 0.0;
  int cases = 0;
  bool identity = true;
  RoadGraph empty;
  empty.image_size = 256;
  for (int round = 0; round < 250; ++round) {
    params.inject_interval_px = round % 3 == 0 ? 50.0 : (round % 3 == 1 ? 25.0 : 13.0);
    const RoadGraph gt = gen.connected(6);
    const RoadGraph pred = round % 5 == 0 ? gen.connected(6) : gen.perturbed(gt);
    const double got = apls(gt, pred, params);
    const double want = oracle::apls(gt, pred, params.buffer_px, params.inject_interval_px);
    worst = std::max(worst, std::abs(got - want));
    identity = identity && apls(gt, gt, params) == 1.0 && apls(gt, empty, params) == 0.0;
    ++cases;
  }
  report(3, worst <= 1e-9 && identity && cases >= 200, "APLS oracle equivalence",
         fmt("%d cases, max |apls - oracle| %.3g, identity/empty %s", cases, worst, identity ? "exact" : "WRONG"));
}

RoadGraph keyed(const PatchGrid& grid, const std::vector<std::pair<PatchIndex, Point>>& keys,
                const std::vector<std::pair<std::uint32_t, std::uint32_t>>& edges)
{
  RoadGraph g;
  g.image_size = grid.image_size();
  for (const auto& [patch, pos] : keys) g.add_node(pos, patch);
  for (const auto& [a, b] : edges) g.add_edge(a, b);
  return g;
}

void check_graph_opt(const OptCheck& scenes)
{
  const PatchGrid grid(64, 16);
  const RoadGraph tri = keyed(grid, {{0, {8, 8}}, {1, {24, 8}}, {5, {24, 24}}}, {{0, 1}, {1, 2}, {0, 2}});
  const bool tri_ok = edge_patch_pairs(remove_triangles(tri, grid)) == std::vector<PatchPair>{{0, 1}, {1, 5}};
  const RoadGraph quad =
      keyed(grid, {{0, {8, 8}}, {1, {24, 8}}, {5, {24, 24}}, {4, {8, 28}}}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
  const bool quad_ok = edge_patch_pairs(remove_quadrilaterals(quad, grid)) == std::vector<PatchPair>{{0, 1}, {1, 5}, {4, 5}};
  const bool ok = tri_ok && quad_ok && scenes.cyclic == 0 && scenes.unstable == 0 && scenes.scenes >= 200;
  report(4, ok, "graph optimization contracts",
         fmt("triangle fixture %s, quadrilateral fixture %s, %zu scenes: %zu with cycles, %zu not idempotent",
             tri_ok ? "ok" : "WRONG", quad_ok ? "ok" : "WRONG", scenes.scenes, scenes.cyclic, scenes.unstable));
}

void check_encoding(const std::vector<RoundTripResult>& clean, const std::vector<RoundTripResult>& noisy)
{
  std::size_t asymmetric = 0;
  for (const auto& r : clean) {
    const PslTensors& t = r.tensors;
    bool reciprocal = true;
    for (PatchIndex i = 0; i < t.grid.patch_count(); ++i) {
      for (int j = 0; j < 8; ++j) {
        const auto k = neighbor(i, j, t.grid);
        const float back = k ? t.link(*k, opposite_direction(j)) : 0.0f;
        reciprocal = reciprocal && t.link(i, j) == back;
      }
    }
    asymmetric += reciprocal ? 0 : 1;
  }
  std::size_t outside = 0;
  std::size_t nodes = 0;
  auto inside = [&](const RoadGraph& g, const PatchGrid& grid) {
    for (const RoadNode& n : g.nodes) {
      ++nodes;
      if (!n.patch || patch_of_point(n.pos, grid) != *n.patch) ++outside;
    }
  };
  for (const auto& r : clean) inside(r.decoded, r.tensors.grid);
  for (const auto& r : noisy) inside(r.decoded, r.tensors.grid);

  const PslTensors empty = encode_psl(RoadGraph{}, PatchGrid(1024, 16));
  const bool shapes = empty.p.size() == 64 * 64 && empty.s.size() == 64 * 64 * 2 && empty.l.size() == 64 * 64 * 8;
  report(5, asymmetric == 0 && outside == 0 && shapes, "encoding invariants",
         fmt("reciprocity %zu/%zu scenes, keypoints outside patch %zu/%zu, shapes %zu/%zu/%zu",
             clean.size() - asymmetric, clean.size(), outside, nodes, empty.p.size(), empty.s.size(), empty.l.size()));
}

// Runs the sweep; reported later so the lines stay in criterion order.
std::pair<bool, std::string> run_noise_sweep(std::vector<RoundTripResult>& noisy)
{
  const double levels[] = {0.0, 0.05, 0.1, 0.2, 0.4};
  std::vector<double> opt_mean;
  std::vector<double> raw_mean;
  std::string detail;
  for (double level : levels) {
    double opt_sum = 0.0;
    double raw_sum = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      RoundTripConfig c;
      c.synth.rng_seed = 1000 + s;
      c.synth.style = style_for(s);
      NoiseParams noise;
      noise.p_drop = level;
      noise.rng_seed = 5000 + s;
      c.noise = noise;
      RoundTripResult r = run_roundtrip(c);
      opt_sum += r.report.apls;
      raw_sum += r.raw_report->apls;
      noisy.push_back(std::move(r));
    }
    opt_mean.push_back(opt_sum / 20.0);
    raw_mean.push_back(raw_sum / 20.0);
    detail += fmt("%.2f:%.4f/%.4f ", level, opt_mean.back(), raw_mean.back());
  }
  bool ok = true;
  for (std::size_t k = 0; k < opt_mean.size(); ++k) {
    if (k > 0 && !(opt_mean[k] < opt_mean[k - 1])) ok = false;
    if (opt_mean[k] < raw_mean[k]) ok = false;
  }
  detail.pop_back();
  return {ok, "p_drop:opt/raw mean APLS " + detail};
}

void check_speed()
{
  const std::uint32_t grids[] = {64, 128, 256, 512};
  const int repeats[] = {21, 11, 7, 5};
  std::vector<double> best;
  std::string detail;
  for (int k = 0; k < 4; ++k) {
    SynthParams sp;
    sp.image_size = grids[k] * 16;
    sp.rng_seed = 0;
    const PslTensors t = encode_psl(generate_network(sp), PatchGrid(sp.image_size, 16));
    double fastest = 1e300;
    for (int r = 0; r < repeats[k]; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const RoadGraph g = decode_and_optimize(t, DecodeParams{}, OptimizeParams{});
      fastest = std::min(fastest, seconds_since(start));
      if (g.nodes.empty()) fastest = 1e300;
    }
    best.push_back(fastest);
    detail += fmt("%u:%.4fs ", grids[k], fastest);
  }
  // Least-squares slope of log time over log grid side.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int k = 0; k < 4; ++k) {
    const double x = std::log(static_cast<double>(grids[k]));
    const double y = std::log(best[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (4 * sxy - sx * sy) / (4 * sxx - sx * sx);
  const double nlogn = std::log((512.0 * 512.0 * std::log(512.0)) / (64.0 * 64.0 * std::log(64.0))) / std::log(8.0);
  const double bound = nlogn + 0.25;
  const bool ok = best[3] < 1.0 && slope <= bound;
  report(7, ok, "single-pass speed", detail + fmt("slope %.3f (bound %.3f)", slope, bound));
}

void check_baseline()
{
  double min_base = 1.0;
  double worst_gap = -1.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RoundTripConfig c;
    c.synth.rng_seed = 200 + seed;
    c.synth.style = style_for(seed);
    c.eval_raw = false;
    c.with_baseline = true;
    const RoundTripResult r = run_roundtrip(c);
    min_base = std::min(min_base, r.baseline->apls);
    worst_gap = std::max(worst_gap, r.baseline->apls - r.report.apls);
  }
  report(8, min_base >= 0.85 && worst_gap <= 0.02, "baseline ordering",
         fmt("10 scenes, min baseline APLS %.4f, max (baseline - pipeline) %.4f", min_base, worst_gap));
}

} // namespace

int main()
{
  std::vector<RoundTripResult> clean;
  std::vector<RoundTripResult> noisy;
  check_round_trip(clean);
  check_losses();
  check_apls_oracle();
  const auto [noise_ok, noise_detail] = run_noise_sweep(noisy);

  OptCheck opt;
  for (const auto& r : clean) opt.add(r.optimized, r.tensors.grid);
  for (const auto& r : noisy) opt.add(r.optimized, r.tensors.grid);
  check_graph_opt(opt);
  check_encoding(clean, noisy);
  report(6, noise_ok, "noise monotonicity", noise_detail);
  check_speed();
  check_baseline();
  std::printf("%s: %d of 8 criteria failed\n", failures == 0 ? "ALL PASS" : "FAILED", failures);
  return failures == 0 ? 0 : 1;
}
