#include "patchgraph/Losses.hpp"

#include "patchgraph/Error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace patchgraph {
namespace {

double bce(double gt, double pre)
{
  const double q = std::clamp(pre, kLossEpsilon, 1.0 - kLossEpsilon);
  return -(gt * std::log(q) + (1.0 - gt) * std::log(1.0 - q));
}

void require_same_size(std::size_t a, std::size_t b, const char* what)
{
  if (a != b) {
    throw DataError(std::string(what) + ": shape mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void require_omega(std::span<const PatchIndex> omega, std::size_t patches, const char* what)
{
  for (PatchIndex i : omega) {
    if (i >= patches) throw DataError(std::string(what) + ": road patch index out of range");
  }
}

} // namespace

void LossWeights::validate() const
{
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0)) throw DataError("loss weights must be non-negative");
}

std::vector<PatchIndex> road_patches(std::span<const float> p_gt)
{
  std::vector<PatchIndex> omega;
  for (std::size_t i = 0; i < p_gt.size(); ++i) {
    if (p_gt[i] == 1.0f) omega.push_back(static_cast<PatchIndex>(i));
  }
  return omega;
}

double loss_p(std::span<const float> p_gt, std::span<const float> p_pre)
{
  require_same_size(p_gt.size(), p_pre.size(), "loss_p");
  double sum = 0.0;
  for (std::size_t i = 0; i < p_gt.size(); ++i) sum += bce(p_gt[i], p_pre[i]);
  return sum;
}

double loss_l(std::span<const float> l_gt, std::span<const float> l_pre, std::span<const PatchIndex> omega)
{
  require_same_size(l_gt.size(), l_pre.size(), "loss_l");
  if (l_gt.size() % 8 != 0) throw DataError("loss_l: link tensor is not n^2 x 8");
  require_omega(omega, l_gt.size() / 8, "loss_l");
  if (omega.empty()) return 0.0;
  double sum = 0.0;
  for (PatchIndex i : omega) {
    for (std::size_t j = 0; j < 8; ++j) sum += bce(l_gt[8 * std::size_t{i} + j], l_pre[8 * std::size_t{i} + j]);
  }
  return sum / static_cast<double>(omega.size());
}

double loss_s(std::span<const float> s_gt, std::span<const float> s_pre, std::span<const PatchIndex> omega)
{
  require_same_size(s_gt.size(), s_pre.size(), "loss_s");
  if (s_gt.size() % 2 != 0) throw DataError("loss_s: offset tensor is not n^2 x 2");
  require_omega(omega, s_gt.size() / 2, "loss_s");
  if (omega.empty()) return 0.0;
  double sum = 0.0;
  for (PatchIndex i : omega) {
    for (std::size_t j = 0; j < 2; ++j) {
      sum += std::abs(static_cast<double>(s_gt[2 * std::size_t{i} + j]) - s_pre[2 * std::size_t{i} + j]);
    }
  }
  return sum / static_cast<double>(omega.size());
}

double loss_seg(const SegMask& m_gt, const SegMask& m_pre)
{
  if (m_gt.width != m_pre.width || m_gt.height != m_pre.height) throw DataError("loss_seg: mask size mismatch");
  const std::size_t count = m_gt.values.size();
  if (count == 0) return 0.0;
  double bce_sum = 0.0;
  double intersection = 0.0;
  double gt_sum = 0.0;
  double pre_sum = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    const double g = m_gt.values[k];
    const double q = m_pre.values[k];
    bce_sum += bce(g, q);
    intersection += g * q;
    gt_sum += g;
    pre_sum += q;
  }
  const double dice = (2.0 * intersection + kLossEpsilon) / (gt_sum + pre_sum + kLossEpsilon);
  return bce_sum / static_cast<double>(count) + (1.0 - dice);
}

LossBreakdown combine_losses(double l_p, double l_s, double l_l, double l_seg, const LossWeights& w)
{
  w.validate();
  LossBreakdown out{l_p, l_s, l_l, l_seg, 0.0, 0.0};
  out.l_graph = w.alpha * l_p + w.beta * l_s + w.gamma * l_l;
  out.total = l_seg + out.l_graph;
  return out;
}

LossBreakdown loss_joint(const PslTensors& gt, const SegMask& gt_mask, const PslTensors& pre,
                         const SegMask& pre_mask, const LossWeights& w)
{
  gt.check_shape();
  pre.check_shape();
  if (gt.grid.n() != pre.grid.n()) throw DataError("loss_joint: ground truth and prediction grids differ");
  const auto omega = road_patches(gt.p);
  return combine_losses(loss_p(gt.p, pre.p), loss_s(gt.s, pre.s, omega), loss_l(gt.l, pre.l, omega),
                        loss_seg(gt_mask, pre_mask), w);
}

} // namespace patchgraph
