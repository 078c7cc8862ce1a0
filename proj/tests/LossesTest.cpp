#include "doctest.h"
#include "patchgraph/Error.hpp"
#include "patchgraph/Losses.hpp"

#include <cmath>
#include <random>

using namespace patchgraph;

namespace {

// Textbook BCE term with the same clamp, for cross checks.
double bce_term(double y, double q)
{
  q = std::clamp(q, 1e-7, 1.0 - 1e-7);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

// 3x3 patch scene: an L-shaped road through patches 0, 1, 4.
PslTensors small_gt()
{
  PslTensors t(PatchGrid(48, 16));
  for (PatchIndex i : {0u, 1u, 4u}) {
    t.p[i] = 1.0f;
    t.s[2 * i] = 0.5f;
    t.s[2 * i + 1] = 0.25f;
  }
  t.link(0, 4) = t.link(1, 3) = 1.0f;
  t.link(1, 6) = t.link(4, 1) = 1.0f;
  return t;
}

SegMask small_mask()
{
  SegMask m(48, 48);
  for (std::uint32_t x = 0; x < 30; ++x) m.at(x, 8) = 1.0f;
  for (std::uint32_t y = 8; y < 30; ++y) m.at(24, y) = 1.0f;
  return m;
}

std::vector<float> noisy(std::vector<float> v, std::mt19937& engine)
{
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& x : v) x = u(engine);
  return v;
}

} // namespace

TEST_CASE("probability loss examples")
{
  const std::vector<float> one{1.0f};
  const std::vector<float> half{0.5f};
  CHECK(loss_p(one, half) == doctest::Approx(0.693147).epsilon(1e-5));
  const std::vector<float> gt{1.0f, 0.0f};
  const std::vector<float> pre{0.9f, 0.1f};
  CHECK(loss_p(gt, pre) == doctest::Approx(0.210721).epsilon(1e-5));
  CHECK(loss_p(gt, gt) < 1e-5);
  CHECK(loss_p(one, std::vector<float>{0.0f}) == doctest::Approx(-std::log(1e-7)));
  CHECK_THROWS_AS(loss_p(gt, one), DataError);
}

TEST_CASE("probability loss matches a direct sum")
{
  std::mt19937 engine(3);
  const PslTensors gt = small_gt();
  for (int round = 0; round < 20; ++round) {
    const std::vector<float> pre = noisy(gt.p, engine);
    double expected = 0.0;
    for (std::size_t i = 0; i < pre.size(); ++i) expected += bce_term(gt.p[i], pre[i]);
    CHECK(loss_p(gt.p, pre) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("offset and link loss examples")
{
  PslTensors gt(PatchGrid(16, 16));
  gt.p[0] = 1.0f;
  gt.s = {0.5f, 0.5f};
  gt.link(0, 4) = 1.0f;
  const auto omega = road_patches(gt.p);
  CHECK(omega == std::vector<PatchIndex>{0});

  const std::vector<float> s_pre{0.25f, 0.75f};
  CHECK(loss_s(gt.s, s_pre, omega) == doctest::Approx(0.5));
  CHECK(loss_s(gt.s, gt.s, omega) == 0.0);

  std::vector<float> l_pre = gt.l;
  l_pre[4] = 0.5f;
  CHECK(loss_l(gt.l, l_pre, omega) == doctest::Approx(0.693147).epsilon(1e-5));
  CHECK(loss_l(gt.l, gt.l, omega) < 1e-5);
}

TEST_CASE("empty road set gives zero offset and link loss")
{
  const PslTensors gt(PatchGrid(32, 16));
  std::mt19937 engine(4);
  const auto omega = road_patches(gt.p);
  CHECK(omega.empty());
  CHECK(loss_s(gt.s, noisy(gt.s, engine), omega) == 0.0);
  CHECK(loss_l(gt.l, noisy(gt.l, engine), omega) == 0.0);
}

TEST_CASE("offset and link losses ignore non-road patches")
{
  const PslTensors gt = small_gt();
  const auto omega = road_patches(gt.p);
  std::mt19937 engine(5);
  PslTensors pre = gt;
  pre.s = noisy(gt.s, engine);
  pre.l = noisy(gt.l, engine);
  const double ls = loss_s(gt.s, pre.s, omega);
  const double ll = loss_l(gt.l, pre.l, omega);
  for (int round = 0; round < 10; ++round) {
    PslTensors other = pre;
    const std::vector<float> s = noisy(gt.s, engine);
    const std::vector<float> l = noisy(gt.l, engine);
    for (PatchIndex i = 0; i < 9; ++i) {
      if (gt.p[i] == 1.0f) continue;
      for (int k = 0; k < 2; ++k) other.s[2 * i + k] = s[2 * i + k];
      for (int j = 0; j < 8; ++j) other.link(i, j) = l[8 * i + j];
    }
    CHECK(loss_s(gt.s, other.s, omega) == ls);
    CHECK(loss_l(gt.l, other.l, omega) == ll);
  }
}

TEST_CASE("segmentation loss examples")
{
  SegMask all(8, 8);
  for (float& v : all.values) v = 1.0f;
  SegMask half(8, 8);
  for (float& v : half.values) v = 0.5f;
  CHECK(loss_seg(all, half) == doctest::Approx(0.693147 + 1.0 - 1.0 / 1.5).epsilon(1e-5));
  CHECK(loss_seg(all, all) < 1e-5);
  CHECK(loss_seg(small_mask(), small_mask()) < 1e-5);
  const SegMask empty(8, 8);
  CHECK(loss_seg(empty, empty) < 1e-5);
  CHECK(loss_seg(empty, empty) >= 0.0);
  CHECK_THROWS_AS(loss_seg(all, SegMask(8, 9)), DataError);
}

TEST_CASE("joint loss combination")
{
  const LossBreakdown b = combine_losses(0.2, 0.5, 0.7, 0.3, LossWeights{});
  CHECK(b.l_graph == doctest::Approx(1.3));
  CHECK(b.total == doctest::Approx(1.6));

  const LossBreakdown doubled = combine_losses(0.2, 0.5, 0.7, 0.3, LossWeights{1.0, 1.0, 1.0});
  CHECK(doubled.l_graph - b.l_graph == doctest::Approx(0.1));
  CHECK(doubled.l_p == b.l_p);

  CHECK_THROWS_AS((LossWeights{-1.0, 1.0, 1.0}.validate()), DataError);
}

TEST_CASE("joint loss is zero only at the ground truth")
{
  const PslTensors gt = small_gt();
  const SegMask mask = small_mask();
  const LossBreakdown at_gt = loss_joint(gt, mask, gt, mask);
  CHECK(at_gt.l_p < 1e-5);
  CHECK(at_gt.l_s == 0.0);
  CHECK(at_gt.l_l < 1e-5);
  CHECK(at_gt.l_seg < 1e-5);
  CHECK(at_gt.total < 1e-5);

  PslTensors moved = gt;
  moved.s[0] = 0.5001f;
  CHECK(loss_joint(gt, mask, moved, mask).l_s > 1e-5);
  PslTensors unlinked = gt;
  unlinked.link(0, 4) = 0.9f;
  CHECK(loss_joint(gt, mask, unlinked, mask).l_l > 1e-5);

  PslTensors wrong_shape(PatchGrid(64, 16));
  CHECK_THROWS_AS(loss_joint(gt, mask, wrong_shape, mask), DataError);
}

TEST_CASE("components are convex in the prediction")
{
  const PslTensors gt = small_gt();
  const auto omega = road_patches(gt.p);
  std::mt19937 engine(9);
  for (int round = 0; round < 50; ++round) {
    const std::vector<float> pa = noisy(gt.p, engine);
    const std::vector<float> pb = noisy(gt.p, engine);
    std::vector<float> pm(pa.size());
    for (std::size_t k = 0; k < pa.size(); ++k) pm[k] = (pa[k] + pb[k]) / 2.0f;
    CHECK(loss_p(gt.p, pm) <= (loss_p(gt.p, pa) + loss_p(gt.p, pb)) / 2.0 + 1e-6);

    const std::vector<float> sa = noisy(gt.s, engine);
    const std::vector<float> sb = noisy(gt.s, engine);
    std::vector<float> sm(sa.size());
    for (std::size_t k = 0; k < sa.size(); ++k) sm[k] = (sa[k] + sb[k]) / 2.0f;
    CHECK(loss_s(gt.s, sm, omega) <= (loss_s(gt.s, sa, omega) + loss_s(gt.s, sb, omega)) / 2.0 + 1e-6);

    const std::vector<float> la = noisy(gt.l, engine);
    const std::vector<float> lb = noisy(gt.l, engine);
    std::vector<float> lm(la.size());
    for (std::size_t k = 0; k < la.size(); ++k) lm[k] = (la[k] + lb[k]) / 2.0f;
    CHECK(loss_l(gt.l, lm, omega) <= (loss_l(gt.l, la, omega) + loss_l(gt.l, lb, omega)) / 2.0 + 1e-6);
  }
}
