#pragma once

#include "patchgraph/Geometry.hpp"
#include "patchgraph/PslCodec.hpp"

#include <span>
#include <vector>

namespace patchgraph {

/// Clamp for logarithms and smoothing term of the dice coefficient.
inline constexpr double kLossEpsilon = 1e-7;

struct LossWeights {
  double alpha = 0.5; // probability term
  double beta = 1.0;  // offset term
  double gamma = 1.0; // link term

  void validate() const;
};

struct LossBreakdown {
  double l_p = 0.0;
  double l_s = 0.0;
  double l_l = 0.0;
  double l_seg = 0.0;
  double l_graph = 0.0;
  double total = 0.0;
};

/// Patches whose ground-truth probability is 1.
std::vector<PatchIndex> road_patches(std::span<const float> p_gt);

/// Binary cross entropy summed (not averaged) over all patches.
double loss_p(std::span<const float> p_gt, std::span<const float> p_pre);

/// Eight-direction BCE summed per road patch, averaged over the road patches.
/// Zero when omega is empty.
double loss_l(std::span<const float> l_gt, std::span<const float> l_pre, std::span<const PatchIndex> omega);

/// Absolute offset error summed per road patch, averaged over the road
/// patches. Zero when omega is empty.
double loss_s(std::span<const float> s_gt, std::span<const float> s_pre, std::span<const PatchIndex> omega);

/// Mean pixel BCE plus soft dice loss.
double loss_seg(const SegMask& m_gt, const SegMask& m_pre);

LossBreakdown combine_losses(double l_p, double l_s, double l_l, double l_seg, const LossWeights& w);

LossBreakdown loss_joint(const PslTensors& gt, const SegMask& gt_mask, const PslTensors& pre,
                         const SegMask& pre_mask, const LossWeights& w = {});

} // namespace patchgraph
