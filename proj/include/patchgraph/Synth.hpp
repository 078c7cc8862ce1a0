#pragma once

#include "patchgraph/Geometry.hpp"
#include "patchgraph/PslCodec.hpp"

#include <cstdint>
#include <string_view>

namespace patchgraph {

enum class NetworkStyle { JitteredGrid, ProximityGraph };

std::string_view style_name(NetworkStyle style);
/// Accepts "grid"/"jittered_grid" and "proximity"/"proximity_graph".
NetworkStyle parse_style(std::string_view name);

struct SynthParams {
  std::uint32_t image_size = 1024;
  std::uint32_t patch_size = 16;
  double min_sep = 48.0;
  double road_width = 15.0;
  NetworkStyle style = NetworkStyle::JitteredGrid;
  std::uint64_t rng_seed = 0;

  /// DataError unless the grid is valid, min_sep >= 2 * patch_size and the
  /// image can hold at least two nodes.
  void validate() const;
};

/// Connected planar network with straight edges and all node pairs at least
/// min_sep apart. Same parameters, same graph.
///
/// JitteredGrid: nodes on a lattice of spacing 1.5 * min_sep, each moved by
/// at most min_sep / 4; a random spanning tree of the lattice edges plus
/// every other lattice edge with probability 1/2.
/// ProximityGraph: Poisson-disk points (radius min_sep) joined by the
/// relative neighbourhood rule.
RoadGraph generate_network(const SynthParams& params);

struct NoiseParams {
  double sigma_p = 0.0; // logit-space Gaussian on p
  double sigma_s = 0.0; // additive Gaussian on s over the road patches
  double p_drop = 0.0;  // per true link pair
  double p_add = 0.0;   // per unlinked pair of adjacent road patches
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool is_zero() const { return sigma_p == 0.0 && sigma_s == 0.0 && p_drop == 0.0 && p_add == 0.0; }
};

/// Simulated prediction error on ground-truth tensors. Link changes are
/// applied to both directions of a pair together.
PslTensors perturb_psl(const PslTensors& t, const NoiseParams& noise);

} // namespace patchgraph
