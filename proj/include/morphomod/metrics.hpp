#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "morphomod/errors.hpp"
#include "morphomod/morphology.hpp"
#include "morphomod/raster.hpp"

namespace morphomod::metrics {

/// Watermark-removal (W), semantic-preservation (T) and mask-quality scores for one image.
/// Optional fields are empty when their region is degenerate or no predicted mask was given.
struct MetricsReport {
  std::optional<double> rmse_w;
  std::optional<double> ssim_w;
  std::optional<double> rmse_t;
  std::optional<double> ssim_t;
  std::optional<double> iou;
  std::optional<double> f1;
  std::optional<double> dice_loss;
  std::optional<double> bce_loss;
  // Filled only by external perceptual tools.
  std::optional<double> lpips_w;
  std::optional<double> lpips_t;
};

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  [[nodiscard]] double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  [[nodiscard]] double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

namespace detail {

inline void require_nonempty(const BinaryMask& region, const char* what) {
  if (count(region) == 0) throw DegenerateInput(std::string(what) + ": region is empty");
}

inline std::vector<double> gaussian_taps(const SsimParams& p) {
  std::vector<double> taps(p.window);
  const int r = p.window / 2;
  for (int i = 0; i < p.window; ++i) {
    const double t = i - r;
    taps[i] = std::exp(-(t * t) / (2.0 * p.sigma * p.sigma));
  }
  return taps;
}

// Separable Gaussian blur of a single plane. The window is truncated at the
// image border and renormalized over the in-bounds taps.
inline std::vector<double> blur(const std::vector<double>& src, int h, int w,
                                const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size()) / 2;
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double norm = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int sx = x + k;
        if (sx < 0 || sx >= w) continue;
        acc += taps[k + r] * src[static_cast<std::size_t>(y) * w + sx];
        norm += taps[k + r];
      }
      tmp[static_cast<std::size_t>(y) * w + x] = acc / norm;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double norm = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int sy = y + k;
        if (sy < 0 || sy >= h) continue;
        acc += taps[k + r] * tmp[static_cast<std::size_t>(sy) * w + x];
        norm += taps[k + r];
      }
      out[static_cast<std::size_t>(y) * w + x] = acc / norm;
    }
  }
  return out;
}

}  // namespace detail

/// Root-mean-square difference over every (pixel, channel) with region = 1.
[[nodiscard]] inline double rmse_region(const Image& a, const Image& b, const BinaryMask& region) {
  require_same_shape(a, b, "rmse_region");
  require_same_shape(a, region, "rmse_region");
  detail::require_nonempty(region, "rmse_region");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (!region(y, x)) continue;
      for (int c = 0; c < 3; ++c) {
        const double diff = a(y, x, c) - b(y, x, c);
        sum += diff * diff;
      }
      n += 3;
    }
  }
  return std::sqrt(sum / static_cast<double>(n));
}

/// Per-pixel SSIM averaged over the three channels.
[[nodiscard]] inline ProbMask ssim_map(const Image& a, const Image& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim_map");
  if (a.height() < p.window || a.width() < p.window) {
    throw DegenerateInput("ssim: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                          " is smaller than the " + std::to_string(p.window) + "x" +
                          std::to_string(p.window) + " window");
  }
  const int h = a.height();
  const int w = a.width();
  const std::size_t n = a.pixel_count();
  const auto taps = detail::gaussian_taps(p);
  const double c1 = p.c1();
  const double c2 = p.c2();

  ProbMask out(h, w, 0.0);
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      const double va = a.data()[i * 3 + c];
      const double vb = b.data()[i * 3 + c];
      pa[i] = va;
      pb[i] = vb;
      paa[i] = va * va;
      pbb[i] = vb * vb;
      pab[i] = va * vb;
    }
    const auto mu_a = detail::blur(pa, h, w, taps);
    const auto mu_b = detail::blur(pb, h, w, taps);
    const auto e_aa = detail::blur(paa, h, w, taps);
    const auto e_bb = detail::blur(pbb, h, w, taps);
    const auto e_ab = detail::blur(pab, h, w, taps);
    for (std::size_t i = 0; i < n; ++i) {
      const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
      const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
      const double cov = e_ab[i] - mu_a[i] * mu_b[i];
      const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
      const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
      out.data()[i] += num / den;
    }
  }
  for (double& v : out.data()) v /= 3.0;
  return out;
}

/// Mean of `map` over pixels where region = 1.
[[nodiscard]] inline double masked_mean(const ProbMask& map, const BinaryMask& region) {
  require_same_shape(map, region, "masked_mean");
  detail::require_nonempty(region, "masked_mean");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < map.data().size(); ++i) {
    if (!region.data()[i]) continue;
    sum += map.data()[i];
    ++n;
  }
  return sum / static_cast<double>(n);
}

/// x * region: pixels outside the region set to 0.
[[nodiscard]] inline Image restrict_to(const Image& x, const BinaryMask& region) {
  require_same_shape(x, region, "restrict_to");
  Image out = x;
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      if (region(y, xx)) continue;
      for (int c = 0; c < 3; ++c) out(y, xx, c) = 0.0;
    }
  }
  return out;
}

/// SSIM map of a * region against b * region. Pixels outside the region read
/// as 0 in both images, so changes there cannot leak into the region's score.
[[nodiscard]] inline ProbMask region_ssim_map(const Image& a, const Image& b, const BinaryMask& region,
                                              const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim_region");
  require_same_shape(a, region, "ssim_region");
  return ssim_map(restrict_to(a, region), restrict_to(b, region), p);
}

/// Mean over region pixels of the SSIM map of a * region against b * region.
[[nodiscard]] inline double ssim_region(const Image& a, const Image& b, const BinaryMask& region,
                                        const SsimParams& p = {}) {
  require_same_shape(a, region, "ssim_region");
  detail::require_nonempty(region, "ssim_region");
  return masked_mean(region_ssim_map(a, b, region, p), region);
}

/// Background image x * (1 - m) and its region (1 - m).
[[nodiscard]] inline std::pair<Image, BinaryMask> background_of(const Image& x, const BinaryMask& m) {
  require_same_shape(x, m, "background_of");
  Image bg = x;
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      if (!m(y, xx)) continue;
      for (int c = 0; c < 3; ++c) bg(y, xx, c) = 0.0;
    }
  }
  return {std::move(bg), invert(m)};
}

struct OverlapCounts {
  std::size_t intersection = 0;
  std::size_t pred = 0;
  std::size_t gt = 0;
  [[nodiscard]] std::size_t union_size() const noexcept { return pred + gt - intersection; }
};

[[nodiscard]] inline OverlapCounts overlap(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "overlap");
  OverlapCounts out;
  for (std::size_t i = 0; i < pred.data().size(); ++i) {
    const bool p = pred.data()[i] != 0;
    const bool g = gt.data()[i] != 0;
    out.pred += p;
    out.gt += g;
    out.intersection += (p && g);
  }
  return out;
}

/// Intersection over union; 1 when both masks are empty.
[[nodiscard]] inline double iou(const BinaryMask& pred, const BinaryMask& gt) {
  const auto c = overlap(pred, gt);
  if (c.union_size() == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_size());
}

/// Dice / F1 score; 1 when both masks are empty.
[[nodiscard]] inline double f1(const BinaryMask& pred, const BinaryMask& gt) {
  const auto c = overlap(pred, gt);
  if (c.pred + c.gt == 0) return 1.0;
  return 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.pred + c.gt);
}

struct DiceBce {
  double dice_loss = 0.0;
  double bce_loss = 0.0;
  double total = 0.0;
};

inline constexpr double kMaskEpsilon = 1e-7;

/// Dice loss plus binary cross-entropy of a soft prediction against a hard mask.
[[nodiscard]] inline DiceBce dice_bce(const ProbMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "dice_bce");
  double inter = 0.0;
  double sum_pred = 0.0;
  double sum_gt = 0.0;
  double bce = 0.0;
  const std::size_t n = pred.data().size();
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(pred.data()[i], kMaskEpsilon, 1.0 - kMaskEpsilon);
    const double g = gt.data()[i] ? 1.0 : 0.0;
    inter += p * g;
    sum_pred += p;
    sum_gt += g;
    bce -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
  }
  DiceBce out;
  out.dice_loss = 1.0 - 2.0 * inter / (sum_pred + sum_gt + kMaskEpsilon);
  out.bce_loss = n == 0 ? 0.0 : bce / static_cast<double>(n);
  out.total = out.dice_loss + out.bce_loss;
  return out;
}

enum class DegeneratePolicy { Throw, Flag };

/// Scores an output image against the watermarked input using the ground-truth mask.
/// With DegeneratePolicy::Flag an empty watermark or background region leaves the
/// corresponding fields empty instead of throwing.
[[nodiscard]] inline MetricsReport report(const Image& x_wm, const Image& x_out, const BinaryMask& gt_mask,
                                          const std::optional<BinaryMask>& pred_mask = std::nullopt,
                                          DegeneratePolicy policy = DegeneratePolicy::Throw,
                                          const SsimParams& ssim = {}) {
  require_same_shape(x_wm, x_out, "report");
  require_same_shape(x_wm, gt_mask, "report");
  MetricsReport r;
  const std::size_t wm_pixels = count(gt_mask);
  if (wm_pixels > 0 || policy == DegeneratePolicy::Throw) {
    r.rmse_w = rmse_region(x_wm, x_out, gt_mask);
    r.ssim_w = masked_mean(region_ssim_map(x_wm, x_out, gt_mask, ssim), gt_mask);
  }
  const BinaryMask bg = invert(gt_mask);
  if (wm_pixels < gt_mask.pixel_count() || policy == DegeneratePolicy::Throw) {
    r.rmse_t = rmse_region(x_wm, x_out, bg);
    r.ssim_t = masked_mean(region_ssim_map(x_wm, x_out, bg, ssim), bg);
  }
  if (pred_mask) {
    r.iou = iou(*pred_mask, gt_mask);
    r.f1 = f1(*pred_mask, gt_mask);
    const DiceBce db = dice_bce(to_prob(*pred_mask), gt_mask);
    r.dice_loss = db.dice_loss;
    r.bce_loss = db.bce_loss;
  }
  return r;
}

/// Field names in serialization order.
inline const std::array<const char*, 10>& report_fields() {
  static const std::array<const char*, 10> names = {"rmse_w", "ssim_w", "rmse_t", "ssim_t", "iou",
                                                    "f1", "dice_loss", "bce_loss", "lpips_w", "lpips_t"};
  return names;
}

/// Field values in report_fields() order.
[[nodiscard]] inline std::array<std::optional<double>, 10> field_values(const MetricsReport& r) {
  return {r.rmse_w, r.ssim_w, r.rmse_t, r.ssim_t, r.iou, r.f1, r.dice_loss, r.bce_loss, r.lpips_w, r.lpips_t};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = nlohmann::json::object();
  const auto values = field_values(r);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i]) {
      j[report_fields()[i]] = *values[i];
    } else {
      j[report_fields()[i]] = nullptr;
    }
  }
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
  auto get = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  r.rmse_w = get("rmse_w");
  r.ssim_w = get("ssim_w");
  r.rmse_t = get("rmse_t");
  r.ssim_t = get("ssim_t");
  r.iou = get("iou");
  r.f1 = get("f1");
  r.dice_loss = get("dice_loss");
  r.bce_loss = get("bce_loss");
  r.lpips_w = get("lpips_w");
  r.lpips_t = get("lpips_t");
}

}  // namespace morphomod::metrics
