#include "doctest.h"
#include "patchgraph/Error.hpp"
#include "patchgraph/PslCodec.hpp"
#include "patchgraph/Synth.hpp"

#include <set>

using namespace patchgraph;

namespace {

RoadGraph horizontal_road()
{
  RoadGraph g;
  g.add_node({0, 8});
  g.add_node({1023.5, 8});
  g.add_edge(0, 1);
  return g;
}

// Star with `arms` straight arms of length 40 around c.
void add_star(RoadGraph& g, Point c, int arms)
{
  const std::uint32_t hub = g.add_node(c);
  const Point dirs[] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int k = 0; k < arms; ++k) g.add_edge(hub, g.add_node(c + dirs[k] * 40.0));
}

} // namespace

TEST_CASE("decode parameters")
{
  CHECK_NOTHROW(DecodeParams{}.validate());
  CHECK_THROWS_AS((DecodeParams{0.0, 0.5}.validate()), DataError);
  CHECK_THROWS_AS((DecodeParams{0.5, 1.0}.validate()), DataError);
}

TEST_CASE("keypoint selection rules")
{
  const PatchGrid grid(256, 16);
  SUBCASE("crossing node wins")
  {
    RoadGraph g;
    g.image_size = 256;
    add_star(g, {100, 100}, 4);
    const auto kp = select_keypoint(patch_of_point({100, 100}, grid), g, grid);
    REQUIRE(kp);
    CHECK(kp->kind == KeypointKind::Intersection);
    CHECK(kp->position == Point{100, 100});
  }
  SUBCASE("higher degree wins among intersections")
  {
    RoadGraph g;
    g.image_size = 256;
    add_star(g, {97, 99}, 3);
    add_star(g, {102, 102}, 4);
    const auto kp = select_keypoint(patch_of_point({100, 100}, grid), g, grid);
    REQUIRE(kp);
    CHECK(kp->position == Point{102, 102});
  }
  SUBCASE("midpoint of a through road")
  {
    RoadGraph g;
    g.image_size = 256;
    g.add_node({5, 20});
    g.add_node({60, 30});
    g.add_edge(0, 1);
    const auto kp = select_keypoint(grid.index(1, 1), g, grid);
    REQUIRE(kp);
    CHECK(kp->kind == KeypointKind::Midpoint);
    CHECK(kp->position.x == doctest::Approx(24.0));
    CHECK(kp->position.y == doctest::Approx(20.0 + 19.0 * 10.0 / 55.0));
    CHECK_FALSE(select_keypoint(grid.index(5, 5), g, grid));
  }
  SUBCASE("endpoint beats a through road")
  {
    const PatchGrid small(48, 16);
    RoadGraph g;
    g.image_size = 48;
    g.add_node({0.5, 24});
    g.add_node({47.5, 24});
    g.add_edge(0, 1);
    g.add_node({20, 20});
    g.add_node({20, 2});
    g.add_edge(2, 3);
    const auto kp = select_keypoint(4, g, small);
    REQUIRE(kp);
    CHECK(kp->kind == KeypointKind::Endpoint);
    CHECK(kp->position == Point{20, 20});
    CHECK(select_keypoint(3, g, small)->kind == KeypointKind::Endpoint);
    CHECK(select_keypoint(5, g, small)->kind == KeypointKind::Endpoint);
    CHECK(select_keypoint(1, g, small)->position == Point{20, 2});
  }
  SUBCASE("longest fragment gives the midpoint")
  {
    RoadGraph g;
    g.image_size = 256;
    g.add_node({40, 2});
    g.add_node({40, 100});
    g.add_edge(0, 1); // long vertical run through column 2
    g.add_node({2, 40});
    g.add_node({100, 33});
    g.add_edge(2, 3);
    const auto kp = select_keypoint(grid.index(2, 2), g, grid);
    REQUIRE(kp);
    CHECK(kp->kind == KeypointKind::Midpoint);
    CHECK(grid.contains(grid.index(2, 2), kp->position));
  }
}

TEST_CASE("encode an empty graph")
{
  const PslTensors t = encode_psl(RoadGraph{}, PatchGrid(1024, 16));
  CHECK(t.p.size() == 64 * 64);
  CHECK(t.s.size() == 64 * 64 * 2);
  CHECK(t.l.size() == 64 * 64 * 8);
  for (float v : t.p) CHECK(v == 0.0f);
  for (float v : t.s) CHECK(v == 0.0f);
  for (float v : t.l) CHECK(v == 0.0f);
}

TEST_CASE("encode a full-width horizontal road")
{
  const PatchGrid grid(1024, 16);
  const PslTensors t = encode_psl(horizontal_road(), grid);
  for (PatchIndex i = 0; i < grid.patch_count(); ++i) {
    CHECK(t.p[i] == (i < 64 ? 1.0f : 0.0f));
  }
  for (PatchIndex i = 1; i < 63; ++i) {
    CHECK(t.s[2 * i] == 0.5f);
    CHECK(t.s[2 * i + 1] == 0.5f);
    for (int j = 0; j < 8; ++j) CHECK(t.link(i, j) == ((j == 3 || j == 4) ? 1.0f : 0.0f));
  }
  CHECK(t.s[0] == 0.0f);
  CHECK(t.link(0, 3) == 0.0f);
  CHECK(t.link(0, 4) == 1.0f);
  CHECK(t.link(63, 3) == 1.0f);
  CHECK(t.link(63, 4) == 0.0f);
  CHECK(select_keypoint(0, horizontal_road(), grid)->kind == KeypointKind::Endpoint);
  CHECK(select_keypoint(63, horizontal_road(), grid)->kind == KeypointKind::Endpoint);

  const RoadGraph d = decode_graph(t);
  CHECK(d.nodes.size() == 64);
  CHECK(d.edges.size() == 63);
  for (const RoadEdge& e : d.edges) CHECK(std::abs(static_cast<int>(*d.nodes[e.a].patch) - static_cast<int>(*d.nodes[e.b].patch)) == 1);
}

TEST_CASE("encode rejects graphs outside the grid")
{
  RoadGraph g = horizontal_road();
  CHECK_THROWS_AS(encode_psl(g, PatchGrid(512, 16)), DataError);
  g.nodes[1].pos = {1030, 8};
  CHECK_THROWS_AS(encode_psl(g, PatchGrid(1024, 16)), DataError);
}

TEST_CASE("decode thresholds and symmetrization")
{
  PslTensors t(PatchGrid(48, 16));
  t.p = {0.9f, 0.8f, 0.2f, 0.7f, 0.0f, 0.0f, 0.0f, 0.0f, 0.0f};
  t.s[0] = 0.25f;
  t.s[1] = 0.75f;
  t.link(0, 4) = 0.9f; // 0 -> 1
  t.link(1, 3) = 0.2f;
  t.link(0, 6) = 0.6f; // 0 -> 3
  t.link(3, 1) = 0.6f;
  t.link(1, 4) = 1.0f; // 1 -> 2, but 2 is not road
  t.link(2, 3) = 1.0f;

  const RoadGraph mean = decode_graph(t, {0.5, 0.5, LinkSymmetrization::Mean});
  CHECK(mean.nodes.size() == 3);
  CHECK(mean.nodes[0].pos == Point{4, 12});
  CHECK(edge_patch_pairs(mean) == std::vector<PatchPair>{{0, 1}, {0, 3}});
  CHECK(edge_patch_pairs(decode_graph(t, {0.5, 0.5, LinkSymmetrization::Min})) == std::vector<PatchPair>{{0, 3}});
  CHECK(edge_patch_pairs(decode_graph(t, {0.5, 0.5, LinkSymmetrization::Max})) ==
        std::vector<PatchPair>{{0, 1}, {0, 3}});
  CHECK(decode_graph(t, {0.95, 0.5}).nodes.empty());

  t.l.pop_back();
  CHECK_THROWS_AS(decode_graph(t), DataError);
}

TEST_CASE("decoded nodes sit inside their patches")
{
  PslTensors t(PatchGrid(64, 16));
  for (PatchIndex i = 0; i < 16; ++i) {
    t.p[i] = 1.0f;
    t.s[2 * i] = (i % 2 == 0) ? 0.0f : 0.99999994f;
    t.s[2 * i + 1] = (i % 3 == 0) ? 0.99999994f : 0.0f;
  }
  const RoadGraph g = decode_graph(t);
  REQUIRE(g.nodes.size() == 16);
  for (const RoadNode& n : g.nodes) CHECK(patch_of_point(n.pos, t.grid) == *n.patch);
}

TEST_CASE("encoded scenes: reciprocity, keypoints and road patches")
{
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    SynthParams sp;
    sp.rng_seed = seed;
    sp.style = seed % 2 ? NetworkStyle::ProximityGraph : NetworkStyle::JitteredGrid;
    const RoadGraph g = generate_network(sp);
    const PatchGrid grid(1024, 16);
    const PslTensors t = encode_psl(g, grid);

    std::set<PatchIndex> centerline_patches;
    const SegMask centerline = rasterize_centerline(g, 1024);
    for (std::uint32_t y = 0; y < 1024; ++y) {
      for (std::uint32_t x = 0; x < 1024; ++x) {
        if (centerline.road(x, y)) centerline_patches.insert(patch_of_point({double(x), double(y)}, grid));
      }
    }
    for (PatchIndex i = 0; i < grid.patch_count(); ++i) {
      CHECK((t.p[i] == 1.0f) == (centerline_patches.count(i) == 1));
      if (t.p[i] == 1.0f) CHECK(patch_of_point(t.keypoint(i), grid) == i);
      for (int j = 0; j < 8; ++j) {
        const auto k = neighbor(i, j, grid);
        if (!k) {
          CHECK(t.link(i, j) == 0.0f);
          continue;
        }
        CHECK(t.link(i, j) == t.link(*k, opposite_direction(j)));
        if (t.link(i, j) == 1.0f) CHECK((t.p[i] == 1.0f && t.p[*k] == 1.0f));
      }
    }
    CHECK(edge_patch_pairs(decode_graph(t)) == link_pairs(t));
  }
}
