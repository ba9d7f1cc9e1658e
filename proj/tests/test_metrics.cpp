#include <gtest/gtest.h>

#include <cmath>

#include "morphomod/metrics.hpp"
#include "support/oracles.hpp"

using namespace morphomod;
using namespace morphomod::metrics;

namespace {

BinaryMask nonempty_mask(oracle::Rng& rng, int h, int w, double density) {
  BinaryMask m = oracle::random_mask(rng, h, w, density);
  m(static_cast<int>(rng() % h), static_cast<int>(rng() % w)) = 1;
  return m;
}

}  // namespace

TEST(Rmse, Examples) {
  oracle::Rng rng(40);
  const Image a = oracle::random_image(rng, 8, 8);
  const BinaryMask full(8, 8, 1);
  EXPECT_EQ(rmse_region(a, a, full), 0.0);
  EXPECT_DOUBLE_EQ(rmse_region(Image(4, 4, 0.0), Image(4, 4, 1.0), BinaryMask(4, 4, 1)), 1.0);
  EXPECT_THROW((void)rmse_region(a, a, BinaryMask(8, 8)), DegenerateInput);
  EXPECT_THROW((void)rmse_region(a, Image(8, 9), full), DimensionMismatch);
}

TEST(Rmse, MatchesScalarOracleSymmetricAndBounded) {
  oracle::Rng rng(41);
  for (int t = 0; t < 500; ++t) {
    const Image a = oracle::random_image(rng, 8, 8);
    const Image b = oracle::random_image(rng, 8, 8);
    const BinaryMask r = nonempty_mask(rng, 8, 8, 0.4);
    const double v = rmse_region(a, b, r);
    ASSERT_NEAR(v, oracle::rmse(a, b, r), 1e-12);
    ASSERT_EQ(v, rmse_region(b, a, r));
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
  oracle::Rng rng(42);
  for (int t = 0; t < 30; ++t) {
    const Image a = oracle::random_image(rng, 11 + t % 5, 12 + t % 7);
    const BinaryMask r = nonempty_mask(rng, a.height(), a.width(), 0.3);
    EXPECT_EQ(ssim_region(a, a, r), 1.0);
  }
}

TEST(Ssim, ConstantImagesMatchClosedForm) {
  // mu_a = 0, mu_b = 1, zero variance: ((2*0*1 + C1)(0 + C2)) / ((0 + 1 + C1)(0 + 0 + C2)).
  const double c1 = 1e-4, c2 = 9e-4;
  const double want = (c1 * c2) / ((1 + c1) * c2);
  const double got = ssim_region(Image(16, 16, 0.0), Image(16, 16, 1.0), BinaryMask(16, 16, 1));
  EXPECT_NEAR(got, want, 1e-15);
}

TEST(Ssim, MatchesNaiveWindowedOracle) {
  oracle::Rng rng(43);
  for (int t = 0; t < 6; ++t) {
    const int h = 11 + static_cast<int>(rng() % 10), w = 11 + static_cast<int>(rng() % 10);
    const Image a = oracle::random_image(rng, h, w);
    Image b = a;
    std::normal_distribution<double> n(0.0, 0.1);
    for (auto& v : b.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
    const ProbMask fast = ssim_map(a, b);
    const ProbMask slow = oracle::ssim_map(a, b);
    for (std::size_t i = 0; i < fast.data().size(); ++i) ASSERT_NEAR(fast.data()[i], slow.data()[i], 1e-6);
    const BinaryMask full(h, w, 1);
    double mean = 0;
    for (double v : slow.data()) mean += v;
    EXPECT_NEAR(ssim_region(a, b, full), mean / slow.data().size(), 1e-6);
  }
}

TEST(Ssim, RegionScoreUsesRegionRestrictedImages) {
  oracle::Rng rng(44);
  const Image a = oracle::random_image(rng, 16, 16);
  const Image b = oracle::random_image(rng, 16, 16);
  const BinaryMask r = nonempty_mask(rng, 16, 16, 0.5);
  const ProbMask slow = oracle::ssim_map(restrict_to(a, r), restrict_to(b, r));
  double sum = 0;
  int n = 0;
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (r(y, x)) {
        sum += slow(y, x);
        ++n;
      }
  EXPECT_NEAR(ssim_region(a, b, r), sum / n, 1e-6);
}

TEST(Ssim, RangeAndErrors) {
  oracle::Rng rng(45);
  for (int t = 0; t < 10; ++t) {
    const ProbMask m = ssim_map(oracle::random_image(rng, 12, 12), oracle::random_image(rng, 12, 12));
    for (double v : m.data()) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
    }
  }
  EXPECT_THROW((void)ssim_region(Image(10, 20), Image(10, 20), BinaryMask(10, 20, 1)), DegenerateInput);
  EXPECT_THROW((void)ssim_region(Image(12, 12), Image(12, 12), BinaryMask(12, 12)), DegenerateInput);
}

TEST(BackgroundOf, ZeroesExactlyTheMask) {
  oracle::Rng rng(46);
  const Image x = oracle::random_image(rng, 6, 6);
  auto [bg0, r0] = background_of(x, BinaryMask(6, 6));
  EXPECT_EQ(bg0, x);
  EXPECT_EQ(r0, BinaryMask(6, 6, 1));
  auto [bg1, r1] = background_of(x, BinaryMask(6, 6, 1));
  EXPECT_EQ(count(r1), 0u);
  for (int t = 0; t < 50; ++t) {
    const BinaryMask m = oracle::random_mask(rng, 6, 6, 0.5);
    auto [bg, region] = background_of(x, m);
    EXPECT_EQ(region, oracle::complement(m));
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 6; ++xx)
        for (int c = 0; c < 3; ++c) ASSERT_EQ(bg(y, xx, c), m(y, xx) ? 0.0 : x(y, xx, c));
  }
}

TEST(Overlap, IouF1Examples) {
  BinaryMask a(1, 3, std::vector<std::uint8_t>{1, 1, 0});
  BinaryMask b(1, 3, std::vector<std::uint8_t>{0, 1, 1});
  EXPECT_DOUBLE_EQ(iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(f1(a, b), 0.5);
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(f1(a, a), 1.0);
  BinaryMask c(1, 3, std::vector<std::uint8_t>{0, 0, 1});
  BinaryMask d(1, 3, std::vector<std::uint8_t>{1, 0, 0});
  EXPECT_EQ(iou(c, d), 0.0);
  EXPECT_EQ(f1(c, d), 0.0);
  EXPECT_EQ(iou(BinaryMask(2, 2), BinaryMask(2, 2)), 1.0);
  EXPECT_EQ(f1(BinaryMask(2, 2), BinaryMask(2, 2)), 1.0);
}

TEST(Overlap, F1IsFunctionOfIou) {
  oracle::Rng rng(47);
  std::uniform_real_distribution<double> u(0.0, 0.7);
  for (int t = 0; t < 1000; ++t) {
    const BinaryMask p = oracle::random_mask(rng, 7, 9, u(rng));
    const BinaryMask g = oracle::random_mask(rng, 7, 9, u(rng));
    const double i = iou(p, g), f = f1(p, g);
    ASSERT_NEAR(f, 2 * i / (1 + i), 1e-12);
    ASSERT_LE(i, f + 1e-15);
    ASSERT_GE(i, 0.0);
    ASSERT_LE(f, 1.0);
  }
}

TEST(DiceBce, Examples) {
  BinaryMask gt(4, 4);
  gt(1, 1) = gt(1, 2) = gt(2, 2) = 1;
  const DiceBce perfect = dice_bce(to_prob(gt), gt);
  EXPECT_NEAR(perfect.dice_loss, 0.0, 1e-6);
  EXPECT_NEAR(perfect.bce_loss, 0.0, 1e-6);

  BinaryMask other(4, 4);
  other(3, 3) = 1;
  EXPECT_NEAR(dice_bce(to_prob(other), gt).dice_loss, 1.0, 1e-6);

  oracle::Rng rng(48);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask g = oracle::random_mask(rng, 5, 5, 0.4);
    const DiceBce r = dice_bce(ProbMask(5, 5, 0.5), g);
    ASSERT_NEAR(r.bce_loss, std::log(2.0), 1e-9);
    ASSERT_DOUBLE_EQ(r.total, r.dice_loss + r.bce_loss);
    ASSERT_GE(r.dice_loss, 0.0);
  }
}

TEST(DiceBce, MatchesDirectFormula) {
  oracle::Rng rng(49);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    ProbMask p(6, 6);
    for (auto& v : p.data()) v = u(rng);
    p.data()[0] = 0.0;
    p.data()[1] = 1.0;
    const BinaryMask g = oracle::random_mask(rng, 6, 6, 0.5);
    const double eps = 1e-7;
    double inter = 0, sp = 0, sg = 0, bce = 0;
    for (std::size_t i = 0; i < p.data().size(); ++i) {
      const double q = std::min(std::max(p.data()[i], eps), 1 - eps);
      const double y = g.data()[i];
      inter += q * y;
      sp += q;
      sg += y;
      bce += -(y * std::log(q) + (1 - y) * std::log(1 - q));
    }
    const DiceBce r = dice_bce(p, g);
    ASSERT_NEAR(r.dice_loss, 1 - 2 * inter / (sp + sg + eps), 1e-12);
    ASSERT_NEAR(r.bce_loss, bce / 36, 1e-12);
  }
}

TEST(Report, IdentityOutput) {
  oracle::Rng rng(50);
  const Image x = oracle::random_image(rng, 16, 16);
  const BinaryMask gt = nonempty_mask(rng, 16, 16, 0.3);
  const MetricsReport r = report(x, x, gt);
  EXPECT_EQ(*r.rmse_w, 0.0);
  EXPECT_EQ(*r.ssim_w, 1.0);
  EXPECT_EQ(*r.rmse_t, 0.0);
  EXPECT_EQ(*r.ssim_t, 1.0);
  EXPECT_FALSE(r.iou);
  EXPECT_FALSE(r.lpips_w);
}

TEST(Report, WatermarkAndBackgroundRegionsAreDisjoint) {
  oracle::Rng rng(51);
  for (int t = 0; t < 30; ++t) {
    const Image x = oracle::random_image(rng, 16, 16);
    const BinaryMask gt = nonempty_mask(rng, 16, 16, 0.3);
    const Image noise = oracle::random_image(rng, 16, 16);
    Image inside = x, outside = x;
    bool any_outside = false;
    for (int y = 0; y < 16; ++y)
      for (int xx = 0; xx < 16; ++xx)
        for (int c = 0; c < 3; ++c) (gt(y, xx) ? inside : outside)(y, xx, c) = noise(y, xx, c);
    for (auto v : gt.data()) any_outside |= v == 0;
    const MetricsReport a = report(x, inside, gt);
    EXPECT_EQ(*a.rmse_t, 0.0);
    EXPECT_EQ(*a.ssim_t, 1.0);
    if (any_outside) {
      const MetricsReport b = report(x, outside, gt);
      EXPECT_EQ(*b.rmse_w, 0.0);
      EXPECT_EQ(*b.ssim_w, 1.0);
    }
  }
}

TEST(Report, FieldsMatchStandaloneOperations) {
  oracle::Rng rng(52);
  for (int t = 0; t < 10; ++t) {
    const Image x = oracle::random_image(rng, 14, 15);
    const Image y = oracle::random_image(rng, 14, 15);
    const BinaryMask gt = nonempty_mask(rng, 14, 15, 0.3);
    const BinaryMask pred = oracle::random_mask(rng, 14, 15, 0.3);
    const MetricsReport r = report(x, y, gt, pred);
    EXPECT_EQ(*r.rmse_w, rmse_region(x, y, gt));
    EXPECT_EQ(*r.ssim_w, ssim_region(x, y, gt));
    EXPECT_EQ(*r.rmse_t, rmse_region(x, y, invert(gt)));
    EXPECT_EQ(*r.ssim_t, ssim_region(x, y, invert(gt)));
    EXPECT_EQ(*r.iou, iou(pred, gt));
    EXPECT_EQ(*r.f1, f1(pred, gt));
    EXPECT_EQ(*r.dice_loss, dice_bce(to_prob(pred), gt).dice_loss);
    EXPECT_EQ(*r.bce_loss, dice_bce(to_prob(pred), gt).bce_loss);
  }
}

TEST(Report, DegeneratePolicies) {
  const Image x(12, 12, 0.3);
  EXPECT_THROW((void)report(x, x, BinaryMask(12, 12)), DegenerateInput);
  EXPECT_THROW((void)report(x, x, BinaryMask(12, 12, 1)), DegenerateInput);
  const MetricsReport empty = report(x, x, BinaryMask(12, 12), std::nullopt, DegeneratePolicy::Flag);
  EXPECT_FALSE(empty.rmse_w);
  EXPECT_FALSE(empty.ssim_w);
  EXPECT_TRUE(empty.rmse_t);
  const MetricsReport full = report(x, x, BinaryMask(12, 12, 1), std::nullopt, DegeneratePolicy::Flag);
  EXPECT_TRUE(full.rmse_w);
  EXPECT_FALSE(full.ssim_t);
}

TEST(Report, JsonRoundTripWithNulls) {
  MetricsReport r;
  r.rmse_w = 0.125;
  r.ssim_w = 0.5;
  r.iou = 1.0;
  const nlohmann::json j = r;
  EXPECT_EQ(j.size(), 10u);
  EXPECT_TRUE(j["lpips_w"].is_null());
  EXPECT_TRUE(j["rmse_t"].is_null());
  EXPECT_EQ(j["rmse_w"].get<double>(), 0.125);
  const MetricsReport back = j.get<MetricsReport>();
  EXPECT_EQ(back.rmse_w, r.rmse_w);
  EXPECT_EQ(back.iou, r.iou);
  EXPECT_FALSE(back.rmse_t);
}
