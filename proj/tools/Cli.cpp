#include "Cli.hpp"

#include "CLI11.hpp"
#include "json.hpp"
#include "patchgraph/Error.hpp"
#include "patchgraph/GraphIo.hpp"
#include "patchgraph/Losses.hpp"
#include "patchgraph/Pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <ostream>
#include <thread>

namespace patchgraph::cli {
namespace {

using Json = nlohmann::ordered_json;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

void emit(std::ostream& out, const Json& j) { out << j.dump() << '\n'; }

Json to_json(const PixelScores& s) { return {{"p", s.precision}, {"r", s.recall}, {"f1", s.f1}}; }

Json to_json(const EvalReport& r)
{
  Json j{{"apls", r.apls}, {"pf1", to_json(r.pf1)}};
  if (r.iou) j["iou"] = *r.iou;
  return j;
}

Json to_json(const LossBreakdown& b)
{
  return {{"l_p", b.l_p}, {"l_s", b.l_s}, {"l_l", b.l_l}, {"l_seg", b.l_seg}, {"l_graph", b.l_graph}, {"total", b.total}};
}

// Graph goes to the file if one is given, else to stdout.
void deliver_graph(const RoadGraph& g, const std::string& path, std::ostream& out)
{
  if (path.empty()) {
    out << graph_to_json(g);
    return;
  }
  write_graph(path, g);
  emit(out, {{"graph", path}, {"nodes", g.nodes.size()}, {"edges", g.edges.size()}});
}

LinkSymmetrization parse_symmetrization(const std::string& name)
{
  static const std::map<std::string, LinkSymmetrization> kModes = {
      {"mean", LinkSymmetrization::Mean}, {"min", LinkSymmetrization::Min}, {"max", LinkSymmetrization::Max}};
  return kModes.at(name);
}

struct SceneFlags {
  std::uint64_t seed = 0;
  std::uint32_t size = 1024;
  std::uint32_t patch = 16;
  double min_sep = 48.0;
  double width = 15.0;
  std::string style = "grid";

  void add(CLI::App* app)
  {
    app->add_option("--seed", seed, "Random seed")->required();
    app->add_option("--size", size, "Image size in pixels")->capture_default_str();
    app->add_option("--patch", patch, "Patch size in pixels")->capture_default_str();
    app->add_option("--min-sep", min_sep, "Minimum node separation in pixels")->capture_default_str();
    app->add_option("--width", width, "Road width in pixels")->capture_default_str();
    app->add_option("--style", style, "Network style")
        ->check(CLI::IsMember({"grid", "jittered_grid", "proximity", "proximity_graph"}))
        ->capture_default_str();
  }

  SynthParams params() const
  {
    SynthParams p;
    p.image_size = size;
    p.patch_size = patch;
    p.min_sep = min_sep;
    p.road_width = width;
    p.style = parse_style(style);
    p.rng_seed = seed;
    return p;
  }
};

struct DecodeFlags {
  double tau_p = 0.5;
  double tau_l = 0.5;
  std::string sym = "mean";

  void add(CLI::App* app)
  {
    app->add_option("--tau-p", tau_p, "Road probability threshold")->capture_default_str();
    app->add_option("--tau-l", tau_l, "Link probability threshold")->capture_default_str();
    app->add_option("--sym", sym, "Link symmetrization")->check(CLI::IsMember({"mean", "min", "max"}))->capture_default_str();
  }

  DecodeParams params() const
  {
    DecodeParams p{tau_p, tau_l, parse_symmetrization(sym)};
    p.validate();
    return p;
  }
};

struct MetricFlags {
  double buffer = 4.0;
  double inject = 50.0;
  std::size_t max_pairs = 1000;

  void add(CLI::App* app)
  {
    app->add_option("--buffer", buffer, "Match and snap radius in pixels")->capture_default_str();
    app->add_option("--inject", inject, "APLS control point spacing in pixels")->capture_default_str();
    app->add_option("--max-pairs", max_pairs, "APLS pairs per direction")->capture_default_str();
  }

  MetricParams params(std::uint64_t seed) const
  {
    MetricParams p{buffer, inject, max_pairs, seed};
    p.validate();
    return p;
  }
};

// Runs fn(i) for i in [0, count) on up to `jobs` threads; results are stored
// by index so the output does not depend on the job count.
template <typename Fn>
void parallel_for(std::size_t count, unsigned jobs, Fn fn)
{
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < std::min<std::size_t>(jobs, count); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{"Patch-wise road graph encoding, decoding and evaluation"};
  app.name("patchgraph");
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic road network");
  SceneFlags synth_scene;
  std::string synth_graph, synth_mask, synth_psl;
  synth_scene.add(synth);
  synth->add_option("--out-graph", synth_graph, "Graph JSON output");
  synth->add_option("--out-mask", synth_mask, "Rasterized road mask (PGM)");
  synth->add_option("--out-psl", synth_psl, "Ground-truth tensors (PSL1)");

  // encode
  auto* encode = app.add_subcommand("encode", "Encode a road graph into patch tensors");
  std::string encode_graph, encode_psl_path;
  std::uint32_t encode_patch = 16;
  std::optional<std::uint32_t> encode_size;
  encode->add_option("--graph", encode_graph, "Graph JSON input")->required();
  encode->add_option("--patch", encode_patch, "Patch size in pixels")->capture_default_str();
  encode->add_option("--size", encode_size, "Expected image size in pixels");
  encode->add_option("--out-psl", encode_psl_path, "Tensor output (PSL1)")->required();

  // decode
  auto* decode = app.add_subcommand("decode", "Decode patch tensors into a road graph");
  std::string decode_psl, decode_graph_path;
  DecodeFlags decode_flags;
  decode->add_option("--psl", decode_psl, "Tensor input (PSL1)")->required();
  decode_flags.add(decode);
  decode->add_option("--out-graph", decode_graph_path, "Graph JSON output");

  // optimize
  auto* opt = app.add_subcommand("optimize", "Refine a patch-wise road graph");
  std::string opt_graph, opt_out;
  std::uint32_t opt_patch = 16;
  int opt_hops = 5;
  opt->add_option("--graph", opt_graph, "Graph JSON input")->required();
  opt->add_option("--patch", opt_patch, "Patch size in pixels")->capture_default_str();
  opt->add_option("--hop-guard", opt_hops, "Hop limit for endpoint joining")->check(CLI::PositiveNumber)->capture_default_str();
  opt->add_option("--out-graph", opt_out, "Graph JSON output");

  // skeletonize
  auto* skel = app.add_subcommand("skeletonize", "Thin a road mask and vectorize the skeleton");
  std::string skel_mask, skel_out;
  double skel_tol = 2.0;
  double skel_width = 15.0;
  skel->add_option("--mask", skel_mask, "Road mask input (PGM)")->required();
  skel->add_option("--simplify", skel_tol, "Polyline simplification tolerance in pixels")->capture_default_str();
  skel->add_option("--width", skel_width, "Road width recorded in the graph")->capture_default_str();
  skel->add_option("--out-graph", skel_out, "Graph JSON output");

  // loss
  auto* loss = app.add_subcommand("loss", "Joint training loss between two tensor sets");
  std::string loss_gt, loss_pred, loss_gt_mask, loss_pred_mask;
  LossWeights weights;
  loss->add_option("--gt-psl", loss_gt, "Ground-truth tensors (PSL1)")->required();
  loss->add_option("--pred-psl", loss_pred, "Predicted tensors (PSL1)")->required();
  loss->add_option("--gt-mask", loss_gt_mask, "Ground-truth mask (PGM)");
  loss->add_option("--pred-mask", loss_pred_mask, "Predicted mask (PGM)");
  loss->add_option("--alpha", weights.alpha, "Weight of the probability term")->capture_default_str();
  loss->add_option("--beta", weights.beta, "Weight of the offset term")->capture_default_str();
  loss->add_option("--gamma", weights.gamma, "Weight of the link term")->capture_default_str();

  // eval
  auto* eval = app.add_subcommand("eval", "Score predicted graphs against a ground-truth graph");
  std::string eval_gt, eval_gt_mask, eval_pred_mask;
  std::vector<std::string> eval_preds;
  std::uint64_t eval_seed = 0;
  MetricFlags eval_metrics;
  unsigned eval_jobs = 1;
  eval->add_option("--gt", eval_gt, "Ground-truth graph JSON")->required();
  eval->add_option("--pred", eval_preds, "Predicted graph JSON (repeatable)")->required();
  eval->add_option("--gt-mask", eval_gt_mask, "Ground-truth mask (PGM) for IoU");
  eval->add_option("--pred-mask", eval_pred_mask, "Predicted mask (PGM) for IoU");
  eval->add_option("--seed", eval_seed, "Seed for APLS pair sampling")->required();
  eval_metrics.add(eval);
  eval->add_option("--jobs", eval_jobs, "Worker threads across predictions")->check(CLI::PositiveNumber)->capture_default_str();

  // roundtrip
  auto* rt = app.add_subcommand("roundtrip", "Synthesize, encode, perturb, decode, optimize and score");
  SceneFlags rt_scene;
  DecodeFlags rt_decode;
  MetricFlags rt_metrics;
  NoiseParams rt_noise;
  std::optional<std::uint64_t> rt_noise_seed;
  int rt_hops = 5;
  bool rt_baseline = false;
  rt_scene.add(rt);
  rt_decode.add(rt);
  rt_metrics.add(rt);
  rt->add_option("--hop-guard", rt_hops, "Hop limit for endpoint joining")->check(CLI::PositiveNumber)->capture_default_str();
  rt->add_option("--sigma-p", rt_noise.sigma_p, "Logit noise on road probability")->capture_default_str();
  rt->add_option("--sigma-s", rt_noise.sigma_s, "Gaussian noise on keypoint offsets")->capture_default_str();
  rt->add_option("--p-drop", rt_noise.p_drop, "Probability of dropping a true link")->capture_default_str();
  rt->add_option("--p-add", rt_noise.p_add, "Probability of adding a spurious link")->capture_default_str();
  rt->add_option("--noise-seed", rt_noise_seed, "Noise seed (defaults to --seed)");
  rt->add_flag("--baseline", rt_baseline, "Also score the skeleton baseline");

  // bench
  auto* bench = app.add_subcommand("bench", "Time decode and optimize on a large patch grid");
  std::uint32_t bench_grid = 512;
  std::uint32_t bench_patch = 16;
  std::uint64_t bench_seed = 0;
  int bench_repeats = 5;
  int bench_hops = 5;
  std::string bench_psl;
  DecodeFlags bench_decode;
  bench->add_option("--grid", bench_grid, "Patches per side")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--patch", bench_patch, "Patch size in pixels")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Scene seed when no tensors are given")->capture_default_str();
  bench->add_option("--psl", bench_psl, "Tensor input (PSL1) instead of a synthetic scene");
  bench->add_option("--repeats", bench_repeats, "Timed repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  bench->add_option("--hop-guard", bench_hops, "Hop limit for endpoint joining")->check(CLI::PositiveNumber)->capture_default_str();
  bench_decode.add(bench);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (synth->parsed()) {
      const SynthParams params = synth_scene.params();
      const RoadGraph g = generate_network(params);
      if (!synth_mask.empty()) write_pgm(synth_mask, rasterize_graph(g, g.width, g.image_size));
      if (!synth_psl.empty()) write_psl(synth_psl, encode_psl(g, PatchGrid(params.image_size, params.patch_size)));
      if (synth_graph.empty()) {
        out << graph_to_json(g);
      } else {
        write_graph(synth_graph, g);
        emit(out, {{"seed", params.rng_seed},
                   {"style", style_name(params.style)},
                   {"nodes", g.nodes.size()},
                   {"edges", g.edges.size()}});
      }
    } else if (encode->parsed()) {
      const RoadGraph g = read_graph(encode_graph);
      if (encode_size && *encode_size != g.image_size) throw DataError("graph image size differs from --size");
      const PslTensors t = encode_psl(g, PatchGrid(g.image_size, encode_patch));
      write_psl(encode_psl_path, t);
      std::size_t road = 0;
      for (float p : t.p) road += p >= 0.5f ? 1 : 0;
      emit(out, {{"psl", encode_psl_path},
                 {"n", t.grid.n()},
                 {"patch_size", t.grid.patch_size()},
                 {"road_patches", road},
                 {"links", link_pairs(t).size()}});
    } else if (decode->parsed()) {
      const DecodeParams params = decode_flags.params();
      deliver_graph(decode_graph(read_psl(decode_psl), params), decode_graph_path, out);
    } else if (opt->parsed()) {
      RoadGraph g = read_graph(opt_graph);
      const PatchGrid grid(g.image_size, opt_patch);
      for (RoadNode& n : g.nodes) {
        if (!n.patch) n.patch = patch_of_point(n.pos, grid);
      }
      deliver_graph(optimize(g, grid, OptimizeParams{opt_hops}), opt_out, out);
    } else if (skel->parsed()) {
      RoadGraph g = mask_to_graph(read_pgm(skel_mask), SkeletonParams{skel_tol});
      g.width = skel_width;
      deliver_graph(g, skel_out, out);
    } else if (loss->parsed()) {
      weights.validate();
      if (loss_gt_mask.empty() != loss_pred_mask.empty()) throw UsageError("--gt-mask and --pred-mask go together");
      const PslTensors gt = read_psl(loss_gt);
      const PslTensors pred = read_psl(loss_pred);
      if (!(gt.grid == pred.grid)) throw DataError("tensor grids differ");
      LossBreakdown b;
      if (loss_gt_mask.empty()) {
        const auto omega = road_patches(gt.p);
        b = combine_losses(loss_p(gt.p, pred.p), loss_s(gt.s, pred.s, omega), loss_l(gt.l, pred.l, omega), 0.0, weights);
      } else {
        b = loss_joint(gt, read_pgm(loss_gt_mask), pred, read_pgm(loss_pred_mask), weights);
      }
      emit(out, to_json(b));
    } else if (eval->parsed()) {
      if (eval_gt_mask.empty() != eval_pred_mask.empty()) throw UsageError("--gt-mask and --pred-mask go together");
      if (!eval_pred_mask.empty() && eval_preds.size() != 1) throw UsageError("masks need exactly one --pred");
      const MetricParams params = eval_metrics.params(eval_seed);
      const RoadGraph gt = read_graph(eval_gt);
      std::optional<SegMask> gt_mask, pred_mask;
      if (!eval_gt_mask.empty()) {
        gt_mask = read_pgm(eval_gt_mask);
        pred_mask = read_pgm(eval_pred_mask);
      }
      std::vector<EvalReport> reports(eval_preds.size());
      parallel_for(eval_preds.size(), eval_jobs, [&](std::size_t i) {
        const RoadGraph pred = read_graph(eval_preds[i]);
        if (pred.image_size != gt.image_size) throw DataError("graphs have different image sizes");
        reports[i] = eval_all(gt, pred, gt_mask ? &*gt_mask : nullptr, pred_mask ? &*pred_mask : nullptr, params);
      });
      if (reports.size() == 1) {
        emit(out, to_json(reports.front()));
      } else {
        Json all = Json::array();
        for (std::size_t i = 0; i < reports.size(); ++i) {
          Json j{{"pred", eval_preds[i]}};
          j.update(to_json(reports[i]));
          all.push_back(std::move(j));
        }
        emit(out, all);
      }
    } else if (rt->parsed()) {
      RoundTripConfig config;
      config.synth = rt_scene.params();
      config.decode = rt_decode.params();
      config.opt.hop_guard = rt_hops;
      config.metrics = rt_metrics.params(rt_scene.seed);
      rt_noise.rng_seed = rt_noise_seed.value_or(rt_scene.seed);
      rt_noise.validate();
      if (!rt_noise.is_zero()) config.noise = rt_noise;
      config.with_baseline = rt_baseline;
      const RoundTripResult r = run_roundtrip(config);

      Json j{{"seed", rt_scene.seed},
             {"style", style_name(config.synth.style)},
             {"image_size", config.synth.image_size},
             {"patch_size", config.synth.patch_size},
             {"nodes", r.gt.nodes.size()},
             {"edges", r.gt.edges.size()},
             {"exact_recovery", r.exact_recovery}};
      j.update(to_json(r.report));
      if (r.raw_report) j["raw"] = to_json(*r.raw_report);
      if (r.baseline) j["baseline"] = to_json(*r.baseline);
      const StageTimings& t = r.timings;
      j["timings"] = {{"synth_s", t.synth_s},   {"encode_s", t.encode_s},     {"perturb_s", t.perturb_s},
                      {"decode_s", t.decode_s}, {"optimize_s", t.optimize_s}, {"eval_s", t.eval_s}};
      if (r.baseline) j["timings"]["baseline_s"] = t.baseline_s;
      emit(out, j);
    } else if (bench->parsed()) {
      const DecodeParams params = bench_decode.params();
      PslTensors t;
      if (bench_psl.empty()) {
        SynthParams sp;
        sp.image_size = bench_grid * bench_patch;
        sp.patch_size = bench_patch;
        sp.rng_seed = bench_seed;
        t = encode_psl(generate_network(sp), PatchGrid(sp.image_size, sp.patch_size));
      } else {
        t = read_psl(bench_psl);
      }
      std::vector<double> times;
      RoadGraph g;
      for (int k = 0; k < bench_repeats; ++k) {
        const auto start = std::chrono::steady_clock::now();
        g = decode_and_optimize(t, params, OptimizeParams{bench_hops});
        times.push_back(seconds_since(start));
      }
      std::sort(times.begin(), times.end());
      const double best = times.front();
      emit(out, {{"grid", t.grid.n()},
                 {"patch_size", t.grid.patch_size()},
                 {"image_size", t.grid.image_size()},
                 {"repeats", bench_repeats},
                 {"nodes", g.nodes.size()},
                 {"edges", g.edges.size()},
                 {"best_s", best},
                 {"median_s", times[times.size() / 2]},
                 {"patches_per_s", best > 0.0 ? static_cast<double>(t.grid.patch_count()) / best : 0.0}});
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ExtrasError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

} // namespace patchgraph::cli
