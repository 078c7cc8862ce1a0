#pragma once

#include "patchgraph/Geometry.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace patchgraph {

/// Patch-wise road probability p (n^2), keypoint offset s (n^2 x 2, x then y,
/// as fractions of the patch size from the patch's upper-left corner) and
/// link probability l (n^2 x 8, neighbour order of kNeighborOffsets).
struct PslTensors {
  PatchGrid grid;
  std::vector<float> p;
  std::vector<float> s;
  std::vector<float> l;

  PslTensors() = default;
  explicit PslTensors(const PatchGrid& g)
      : grid(g), p(g.patch_count(), 0.0f), s(2 * g.patch_count(), 0.0f), l(8 * g.patch_count(), 0.0f)
  {
  }

  float link(PatchIndex i, int j) const { return l[8 * std::size_t{i} + static_cast<std::size_t>(j)]; }
  float& link(PatchIndex i, int j) { return l[8 * std::size_t{i} + static_cast<std::size_t>(j)]; }
  Point keypoint(PatchIndex i) const;

  /// Throws DataError if the array sizes disagree with the grid.
  void check_shape() const;
};

enum class LinkSymmetrization { Mean, Min, Max };

struct DecodeParams {
  double tau_p = 0.5;
  double tau_l = 0.5;
  LinkSymmetrization symmetrization = LinkSymmetrization::Mean;

  void validate() const;
};

enum class KeypointKind { Intersection, Endpoint, Midpoint };

struct KeypointChoice {
  KeypointKind kind = KeypointKind::Midpoint;
  Point position;
};

/// Keypoint of patch i: the highest-degree intersection node inside it, else
/// an endpoint node, else the arc-length midpoint of the longest road
/// fragment crossing it. Returns nothing for road-free patches.
std::optional<KeypointChoice> select_keypoint(PatchIndex i, const RoadGraph& g, const PatchGrid& grid);

/// Ground-truth tensors of a road graph.
PslTensors encode_psl(const RoadGraph& g, const PatchGrid& grid);

/// Single sweep over the patches: one node per patch with p >= tau_p, one edge
/// per adjacent road pair whose symmetrized link passes tau_l. Nodes carry
/// their patch index.
RoadGraph decode_graph(const PslTensors& t, const DecodeParams& params = {});

/// Sorted unordered patch pairs linked in t (both patches and the link at or
/// above threshold in both directions).
std::vector<PatchPair> link_pairs(const PslTensors& t, double threshold = 0.5);

/// Sorted unordered patch pairs joined by edges of a patch-annotated graph.
std::vector<PatchPair> edge_patch_pairs(const RoadGraph& g);

// PSL1 container: magic "PSL1", u32 n, u32 patch_size, then float32 p, s, l,
// everything little-endian.
void write_psl(std::ostream& out, const PslTensors& t);
PslTensors read_psl(std::istream& in);
void write_psl(const std::filesystem::path& path, const PslTensors& t);
PslTensors read_psl(const std::filesystem::path& path);

} // namespace patchgraph
