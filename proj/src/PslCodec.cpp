#include "patchgraph/PslCodec.hpp"

#include "patchgraph/Error.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <unordered_map>

namespace patchgraph {

Point PslTensors::keypoint(PatchIndex i) const
{
  const double size = grid.patch_size();
  return grid.origin(i) + Point{s[2 * std::size_t{i}] * size, s[2 * std::size_t{i} + 1] * size};
}

void PslTensors::check_shape() const
{
  const std::size_t count = grid.patch_count();
  if (p.size() != count || s.size() != 2 * count || l.size() != 8 * count) {
    throw DataError("PSL tensors do not match a " + std::to_string(grid.n()) + "x" +
                    std::to_string(grid.n()) + " patch grid");
  }
}

void DecodeParams::validate() const
{
  if (!(tau_p > 0.0 && tau_p < 1.0)) throw DataError("tau_p must lie strictly inside (0, 1)");
  if (!(tau_l > 0.0 && tau_l < 1.0)) throw DataError("tau_l must lie strictly inside (0, 1)");
}

namespace {

// A stroke is a maximal chain of edges joined through degree-2 nodes, so a
// road that bends at a shape node is clipped as one piece.
struct Stroke {
  std::uint32_t id = 0; // lowest edge id in the chain
  std::vector<Point> poly;
};

std::vector<Stroke> build_strokes(const RoadGraph& g, const std::vector<std::uint32_t>& deg)
{
  std::vector<std::vector<std::uint32_t>> incident(g.nodes.size());
  for (std::uint32_t e = 0; e < g.edges.size(); ++e) {
    incident[g.edges[e].a].push_back(e);
    incident[g.edges[e].b].push_back(e);
  }
  std::vector<bool> used(g.edges.size(), false);
  std::vector<Stroke> strokes;

  auto append_oriented = [&](Stroke& st, std::uint32_t e, std::uint32_t from) {
    std::vector<Point> poly = g.polyline(e);
    if (g.edges[e].a != from) std::reverse(poly.begin(), poly.end());
    st.poly.insert(st.poly.end(), st.poly.empty() ? poly.begin() : poly.begin() + 1, poly.end());
    st.id = std::min(st.id, e);
    used[e] = true;
    return g.edges[e].a == from ? g.edges[e].b : g.edges[e].a;
  };

  auto walk = [&](std::uint32_t start, std::uint32_t e) {
    Stroke st{std::numeric_limits<std::uint32_t>::max(), {}};
    std::uint32_t cur = append_oriented(st, e, start);
    while (deg[cur] == 2) {
      const auto next = std::find_if(incident[cur].begin(), incident[cur].end(),
                                     [&](std::uint32_t f) { return !used[f]; });
      if (next == incident[cur].end()) break;
      cur = append_oriented(st, *next, cur);
    }
    strokes.push_back(std::move(st));
  };

  for (std::uint32_t u = 0; u < g.nodes.size(); ++u) {
    if (deg[u] == 2) continue;
    for (std::uint32_t e : incident[u]) {
      if (!used[e]) walk(u, e);
    }
  }
  // Whatever is left forms closed loops of degree-2 nodes.
  for (std::uint32_t e = 0; e < g.edges.size(); ++e) {
    if (!used[e]) walk(g.edges[e].a, e);
  }
  return strokes;
}

std::vector<PatchIndex> patch_sequence(std::span<const Point> poly, const PatchGrid& grid)
{
  std::vector<PatchIndex> seq;
  const auto n = static_cast<std::int64_t>(grid.n());
  for (std::size_t k = 1; k < poly.size(); ++k) {
    for (const Cell& c : walk_cells(poly[k - 1], poly[k], grid.patch_size(), false)) {
      if (c.col < 0 || c.row < 0 || c.col >= n || c.row >= n) continue;
      const PatchIndex i = grid.index(static_cast<std::uint32_t>(c.row), static_cast<std::uint32_t>(c.col));
      if (seq.empty() || seq.back() != i) seq.push_back(i);
    }
  }
  return seq;
}

Point clamp_into_patch(Point pt, PatchIndex i, const PatchGrid& grid)
{
  const Point lo = grid.origin(i);
  const double size = grid.patch_size();
  const double hx = std::nextafter(lo.x + size, lo.x);
  const double hy = std::nextafter(lo.y + size, lo.y);
  return {std::clamp(pt.x, lo.x, hx), std::clamp(pt.y, lo.y, hy)};
}

class KeypointIndex {
public:
  KeypointIndex(const RoadGraph& g, const PatchGrid& grid)
      : graph_(g), grid_(grid), degree_(g.degrees()), strokes_(build_strokes(g, degree_))
  {
    for (std::uint32_t k = 0; k < strokes_.size(); ++k) {
      sequences_.push_back(patch_sequence(strokes_[k].poly, grid));
      for (PatchIndex i : sequences_.back()) candidates_.emplace_back(i, k);
    }
    std::sort(candidates_.begin(), candidates_.end());
    candidates_.erase(std::unique(candidates_.begin(), candidates_.end()), candidates_.end());
    for (std::uint32_t u = 0; u < g.nodes.size(); ++u) {
      if (degree_[u] == 1 || degree_[u] >= 3) nodes_by_patch_[patch_of_point(g.nodes[u].pos, grid)].push_back(u);
    }
  }

  std::vector<PatchIndex> candidate_patches() const
  {
    std::vector<PatchIndex> out;
    for (const auto& [i, k] : candidates_) {
      if (out.empty() || out.back() != i) out.push_back(i);
    }
    return out;
  }

  const std::vector<std::vector<PatchIndex>>& sequences() const { return sequences_; }

  std::optional<KeypointChoice> select(PatchIndex i) const
  {
    const auto lo = std::lower_bound(candidates_.begin(), candidates_.end(), std::pair<PatchIndex, std::uint32_t>{i, 0});
    struct Best {
      double length = -1.0;
      std::uint32_t stroke_id = 0;
      std::vector<Point> fragment;
    } best;
    for (auto it = lo; it != candidates_.end() && it->first == i; ++it) {
      const Stroke& st = strokes_[it->second];
      for (auto& frag : clip_polyline_to_patch(st.poly, i, grid_)) {
        const double len = polyline_length(frag);
        if (len > best.length || (len == best.length && st.id < best.stroke_id)) {
          best = {len, st.id, std::move(frag)};
        }
      }
    }
    if (best.length <= 0.0) return std::nullopt;

    const Point center = grid_.center(i);
    if (const auto found = nodes_by_patch_.find(i); found != nodes_by_patch_.end()) {
      std::optional<std::uint32_t> junction;
      std::optional<std::uint32_t> endpoint;
      for (std::uint32_t u : found->second) {
        const double du = distance(graph_.nodes[u].pos, center);
        if (degree_[u] >= 3) {
          if (!junction || degree_[u] > degree_[*junction] ||
              (degree_[u] == degree_[*junction] && du < distance(graph_.nodes[*junction].pos, center))) {
            junction = u;
          }
        } else if (!endpoint || du < distance(graph_.nodes[*endpoint].pos, center)) {
          endpoint = u;
        }
      }
      if (junction) return KeypointChoice{KeypointKind::Intersection, graph_.nodes[*junction].pos};
      if (endpoint) return KeypointChoice{KeypointKind::Endpoint, graph_.nodes[*endpoint].pos};
    }
    const Point mid = point_at_arc_length(best.fragment, best.length / 2.0);
    return KeypointChoice{KeypointKind::Midpoint, clamp_into_patch(mid, i, grid_)};
  }

private:
  const RoadGraph& graph_;
  PatchGrid grid_;
  std::vector<std::uint32_t> degree_;
  std::vector<Stroke> strokes_;
  std::vector<std::vector<PatchIndex>> sequences_;
  std::vector<std::pair<PatchIndex, std::uint32_t>> candidates_;
  // Nodes are visited in id order, so ties keep the lowest id.
  std::unordered_map<PatchIndex, std::vector<std::uint32_t>> nodes_by_patch_;
};

void check_graph_for_grid(const RoadGraph& g, const PatchGrid& grid)
{
  validate(g);
  if (g.image_size != grid.image_size()) {
    throw DataError("graph image size " + std::to_string(g.image_size) + " does not match grid size " +
                    std::to_string(grid.image_size()));
  }
}

float offset_fraction(double value)
{
  constexpr float kBelowOne = 1.0f - std::numeric_limits<float>::epsilon() / 2.0f;
  return std::clamp(static_cast<float>(value), 0.0f, kBelowOne);
}

} // namespace

std::optional<KeypointChoice> select_keypoint(PatchIndex i, const RoadGraph& g, const PatchGrid& grid)
{
  check_graph_for_grid(g, grid);
  if (i >= grid.patch_count()) throw DataError("patch index out of range");
  return KeypointIndex(g, grid).select(i);
}

PslTensors encode_psl(const RoadGraph& g, const PatchGrid& grid)
{
  check_graph_for_grid(g, grid);
  PslTensors t(grid);
  const KeypointIndex index(g, grid);
  const double size = grid.patch_size();
  for (PatchIndex i : index.candidate_patches()) {
    const auto choice = index.select(i);
    if (!choice) continue;
    t.p[i] = 1.0f;
    const Point rel = choice->position - grid.origin(i);
    t.s[2 * std::size_t{i}] = offset_fraction(rel.x / size);
    t.s[2 * std::size_t{i} + 1] = offset_fraction(rel.y / size);
  }
  for (const auto& seq : index.sequences()) {
    for (std::size_t k = 1; k < seq.size(); ++k) {
      const PatchIndex a = seq[k - 1];
      const PatchIndex b = seq[k];
      if (t.p[a] != 1.0f || t.p[b] != 1.0f) continue;
      const auto j = direction_between(a, b, grid);
      if (!j) continue;
      t.link(a, *j) = 1.0f;
      t.link(b, opposite_direction(*j)) = 1.0f;
    }
  }
  return t;
}

RoadGraph decode_graph(const PslTensors& t, const DecodeParams& params)
{
  t.check_shape();
  params.validate();
  const PatchGrid& grid = t.grid;
  const std::size_t count = grid.patch_count();

  RoadGraph g;
  g.image_size = grid.image_size();
  std::vector<std::uint32_t> node_of(count, std::numeric_limits<std::uint32_t>::max());
  for (PatchIndex i = 0; i < count; ++i) {
    if (t.p[i] >= params.tau_p) node_of[i] = g.add_node(t.keypoint(i), i);
  }

  auto symmetrize = [&params](double a, double b) {
    switch (params.symmetrization) {
    case LinkSymmetrization::Min: return std::min(a, b);
    case LinkSymmetrization::Max: return std::max(a, b);
    case LinkSymmetrization::Mean: break;
    }
    return (a + b) / 2.0;
  };

  // Directions 4..7 point to higher patch indices, so each unordered pair is
  // seen exactly once.
  for (PatchIndex i = 0; i < count; ++i) {
    if (node_of[i] == std::numeric_limits<std::uint32_t>::max()) continue;
    for (int j = 4; j < 8; ++j) {
      const auto k = neighbor(i, j, grid);
      if (!k || node_of[*k] == std::numeric_limits<std::uint32_t>::max()) continue;
      if (symmetrize(t.link(i, j), t.link(*k, opposite_direction(j))) >= params.tau_l) {
        g.add_edge(node_of[i], node_of[*k]);
      }
    }
  }
  return g;
}

std::vector<PatchPair> link_pairs(const PslTensors& t, double threshold)
{
  t.check_shape();
  std::vector<PatchPair> pairs;
  for (PatchIndex i = 0; i < t.grid.patch_count(); ++i) {
    if (t.p[i] < threshold) continue;
    for (int j = 4; j < 8; ++j) {
      const auto k = neighbor(i, j, t.grid);
      if (!k || t.p[*k] < threshold) continue;
      if (t.link(i, j) >= threshold && t.link(*k, opposite_direction(j)) >= threshold) pairs.emplace_back(i, *k);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

std::vector<PatchPair> edge_patch_pairs(const RoadGraph& g)
{
  std::vector<PatchPair> pairs;
  pairs.reserve(g.edges.size());
  for (const RoadEdge& e : g.edges) {
    const auto& pa = g.nodes[e.a].patch;
    const auto& pb = g.nodes[e.b].patch;
    if (!pa || !pb) throw DataError("graph nodes are not patch-annotated");
    pairs.push_back(std::minmax(*pa, *pb));
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

namespace {

constexpr std::array<char, 4> kPslMagic = {'P', 'S', 'L', '1'};

void put_u32(std::ostream& out, std::uint32_t v)
{
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in)
{
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  if (in.gcount() != 4) throw DataError("PSL: truncated file");
  return std::uint32_t{bytes[0]} | (std::uint32_t{bytes[1]} << 8) | (std::uint32_t{bytes[2]} << 16) |
         (std::uint32_t{bytes[3]} << 24);
}

void put_floats(std::ostream& out, const std::vector<float>& values)
{
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

void get_floats(std::istream& in, std::vector<float>& values)
{
  for (float& v : values) v = std::bit_cast<float>(get_u32(in));
}

} // namespace

void write_psl(std::ostream& out, const PslTensors& t)
{
  t.check_shape();
  out.write(kPslMagic.data(), kPslMagic.size());
  put_u32(out, t.grid.n());
  put_u32(out, t.grid.patch_size());
  put_floats(out, t.p);
  put_floats(out, t.s);
  put_floats(out, t.l);
}

PslTensors read_psl(std::istream& in)
{
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() != 4 || magic != kPslMagic) throw DataError("PSL: bad magic");
  const std::uint32_t n = get_u32(in);
  const std::uint32_t patch = get_u32(in);
  if (n == 0 || patch == 0 || std::uint64_t{n} * patch > std::numeric_limits<std::uint32_t>::max() ||
      std::uint64_t{n} * n > (std::uint64_t{1} << 26)) {
    throw DataError("PSL: implausible grid " + std::to_string(n) + " x " + std::to_string(patch));
  }
  PslTensors t(PatchGrid(n * patch, patch));
  get_floats(in, t.p);
  get_floats(in, t.s);
  get_floats(in, t.l);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("PSL: trailing bytes after tensors");
  return t;
}

void write_psl(const std::filesystem::path& path, const PslTensors& t)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_psl(out, t);
  if (!out) throw DataError("failed writing " + path.string());
}

PslTensors read_psl(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_psl(in);
}

} // namespace patchgraph
