#pragma once

// Synthetic watermark datasets: transparent CLWD-style overlays, opaque
// Alpha1-S/L overlays at fixed coverage, and the four-position box corpus
// used for the disorientation experiment.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "morphomod/errors.hpp"
#include "morphomod/inpaint.hpp"
#include "morphomod/morphology.hpp"
#include "morphomod/pipeline.hpp"
#include "morphomod/raster.hpp"

namespace morphomod::datagen {

using Rng = std::mt19937_64;

/// Independent stream for sample `index` of a run seeded with `seed`.
[[nodiscard]] inline Rng sample_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x6d6f7270u};
  return Rng(seq);
}

[[nodiscard]] inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

[[nodiscard]] inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// ---------------------------------------------------------------------------
// Procedural content

/// Smooth, varied host image: gradient plus a few oriented sinusoids per channel.
[[nodiscard]] inline Image procedural_host(Rng& rng, int height = 256, int width = 256) {
  Image img(height, width);
  struct Wave {
    double fy, fx, phase, amp;
  };
  for (int c = 0; c < 3; ++c) {
    const double base = uniform(rng, 0.25, 0.75);
    const double gy = uniform(rng, -0.25, 0.25);
    const double gx = uniform(rng, -0.25, 0.25);
    std::array<Wave, 3> waves{};
    for (auto& wv : waves) {
      const double freq = uniform(rng, 1.0, 8.0) * 2.0 * std::numbers::pi;
      const double angle = uniform(rng, 0.0, std::numbers::pi);
      wv = {freq * std::sin(angle), freq * std::cos(angle), uniform(rng, 0.0, 2.0 * std::numbers::pi),
            uniform(rng, 0.03, 0.12)};
    }
    for (int y = 0; y < height; ++y) {
      const double v = static_cast<double>(y) / height - 0.5;
      for (int x = 0; x < width; ++x) {
        const double u = static_cast<double>(x) / width - 0.5;
        double s = base + gy * v + gx * u;
        for (const auto& wv : waves) s += wv.amp * std::sin(wv.fy * v + wv.fx * u + wv.phase);
        img(y, x, c) = std::clamp(s, 0.0, 1.0);
      }
    }
  }
  return img;
}

/// Dense synthetic logo: a filled ellipse or rounded rectangle in one color
/// with horizontal bars ("text lines") in a contrasting color. Alpha is 1 on
/// the shape and 0 elsewhere.
[[nodiscard]] inline ImageWithAlpha procedural_logo(Rng& rng, int width = 128) {
  const double aspect = uniform(rng, 0.6, 1.0);
  const int height = std::max(4, static_cast<int>(std::lround(width * aspect)));
  const bool ellipse = uniform_int(rng, 0, 1) == 1;
  const Rgb fg{uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
  const Rgb ink{1.0 - fg.r, 1.0 - fg.g, 1.0 - fg.b};
  const int bars = uniform_int(rng, 2, 4);
  const double corner = 0.2;

  ImageWithAlpha logo{Image(height, width), ProbMask(height, width, 0.0)};
  for (int y = 0; y < height; ++y) {
    const double v = (y + 0.5) / height * 2.0 - 1.0;
    for (int x = 0; x < width; ++x) {
      const double u = (x + 0.5) / width * 2.0 - 1.0;
      bool inside;
      if (ellipse) {
        inside = u * u + v * v <= 1.0;
      } else {
        const double qu = std::max(std::abs(u) - (1.0 - corner), 0.0);
        const double qv = std::max(std::abs(v) - (1.0 - corner), 0.0);
        inside = qu * qu + qv * qv <= corner * corner;
      }
      if (!inside) continue;
      const double band = (v + 0.6) / 1.2 * bars;
      const bool on_bar = std::abs(u) < 0.55 && band > 0.0 && band < bars && (band - std::floor(band)) < 0.45;
      const Rgb col = on_bar ? ink : fg;
      logo.rgb(y, x, 0) = col.r;
      logo.rgb(y, x, 1) = col.g;
      logo.rgb(y, x, 2) = col.b;
      logo.alpha(y, x) = 1.0;
    }
  }
  return logo;
}

// ---------------------------------------------------------------------------
// Overlay geometry

/// Scales `logo` to `target_width` pixels and rotates it by `rotation_deg`
/// about its center, with bilinear resampling of premultiplied color. Output
/// alpha below 0.5 is cut to 0 so the overlay footprint is a hard set.
/// `opaque` forces the surviving alpha to exactly 1.
[[nodiscard]] inline ImageWithAlpha transform_logo(const ImageWithAlpha& logo, double target_width,
                                                   double rotation_deg, bool opaque = false) {
  require_same_shape(logo.rgb, logo.alpha, "transform_logo");
  if (logo.width() == 0 || logo.height() == 0) throw InvalidArgument("transform_logo: empty logo");
  if (!(target_width > 0.0)) throw InvalidArgument("transform_logo: target width must be positive");
  const double s = target_width / logo.width();
  const double th = rotation_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(th);
  const double sn = std::sin(th);
  const double sw = logo.width() * s;
  const double sh = logo.height() * s;
  const int ow = std::max(1, static_cast<int>(std::ceil(std::abs(sw * cs) + std::abs(sh * sn))));
  const int oh = std::max(1, static_cast<int>(std::ceil(std::abs(sw * sn) + std::abs(sh * cs))));

  auto sample = [&](int y, int x, int c) -> double {
    if (y < 0 || y >= logo.height() || x < 0 || x >= logo.width()) return 0.0;
    const double a = logo.alpha(y, x);
    return c < 3 ? logo.rgb(y, x, c) * a : a;
  };

  ImageWithAlpha out{Image(oh, ow), ProbMask(oh, ow, 0.0)};
  const double ocx = ow / 2.0;
  const double ocy = oh / 2.0;
  const double icx = logo.width() / 2.0;
  const double icy = logo.height() / 2.0;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double px = x + 0.5 - ocx;
      const double py = y + 0.5 - ocy;
      // inverse rotation, then inverse scale; -0.5 moves to sample-center coordinates
      const double sx = (cs * px + sn * py) / s + icx - 0.5;
      const double sy = (-sn * px + cs * py) / s + icy - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0;
      const double fy = sy - y0;
      std::array<double, 4> v{};
      for (int c = 0; c < 4; ++c) {
        v[c] = (1 - fy) * ((1 - fx) * sample(y0, x0, c) + fx * sample(y0, x0 + 1, c)) +
               fy * ((1 - fx) * sample(y0 + 1, x0, c) + fx * sample(y0 + 1, x0 + 1, c));
      }
      const double a = v[3];
      if (a < 0.5) continue;
      for (int c = 0; c < 3; ++c) out.rgb(y, x, c) = std::clamp(v[c] / a, 0.0, 1.0);
      out.alpha(y, x) = opaque ? 1.0 : std::min(a, 1.0);
    }
  }
  return out;
}

struct WatermarkSpec {
  ImageWithAlpha logo;  // already scaled and rotated
  double scale = 1.0;   // logo width as a fraction of host width, before rotation
  PixelOrigin position;
  double rotation = 0.0;
  double opacity = 1.0;
};

struct WatermarkedSample {
  Image image;
  BinaryMask mask;
  WatermarkSpec spec;
};

/// Composites the placed logo and derives the mask as the set of host pixels
/// where the placed alpha is positive.
[[nodiscard]] inline WatermarkedSample apply_watermark(const Image& host, WatermarkSpec spec) {
  if (!(spec.opacity >= 0.0 && spec.opacity <= 1.0)) throw InvalidArgument("watermark opacity must lie in [0,1]");
  WatermarkedSample out;
  out.image = composite(host, spec.logo, spec.position, spec.opacity);
  out.mask = BinaryMask(host.height(), host.width());
  if (spec.opacity > 0.0) {
    for (int y = 0; y < spec.logo.height(); ++y) {
      for (int x = 0; x < spec.logo.width(); ++x) {
        const int hy = y + spec.position.y;
        const int hx = x + spec.position.x;
        if (!host.in_bounds(hy, hx)) continue;
        if (spec.logo.alpha(y, x) > 0.0) out.mask(hy, hx) = 1;
      }
    }
  }
  out.spec = std::move(spec);
  return out;
}

// ---------------------------------------------------------------------------
// CLWD-style transparent overlays

struct ClwdRanges {
  double opacity_min = 0.3;
  double opacity_max = 0.7;
  double scale_min = 0.2;
  double scale_max = 0.5;
  double rotation_max_deg = 30.0;
};

/// Transparent overlay with random opacity, size, rotation and position.
[[nodiscard]] inline WatermarkedSample synth_clwd_like(const Image& host, const ImageWithAlpha& logo,
                                                       std::uint64_t seed, const ClwdRanges& ranges = {}) {
  Rng rng = sample_rng(seed, 0);
  const double opacity = uniform(rng, ranges.opacity_min, std::nextafter(ranges.opacity_max, 2.0));
  const double scale = uniform(rng, ranges.scale_min, std::nextafter(ranges.scale_max, 2.0));
  const double rotation = uniform(rng, -ranges.rotation_max_deg, ranges.rotation_max_deg);
  WatermarkSpec spec;
  spec.logo = transform_logo(logo, scale * host.width(), rotation);
  if (spec.logo.width() > host.width() || spec.logo.height() > host.height()) {
    throw InvalidArgument("synth_clwd_like: logo larger than host after scaling (" +
                          std::to_string(spec.logo.height()) + "x" + std::to_string(spec.logo.width()) + ")");
  }
  spec.scale = scale;
  spec.rotation = rotation;
  spec.opacity = std::min(opacity, ranges.opacity_max);
  spec.position = {uniform_int(rng, 0, host.height() - spec.logo.height()),
                   uniform_int(rng, 0, host.width() - spec.logo.width())};
  return apply_watermark(host, std::move(spec));
}

// ---------------------------------------------------------------------------
// Alpha1-S / Alpha1-L opaque overlays

enum class Alpha1Variant { Small, Large };

struct CoverageTarget {
  double target;
  double tolerance;
};

[[nodiscard]] constexpr CoverageTarget coverage_target(Alpha1Variant v) noexcept {
  return v == Alpha1Variant::Small ? CoverageTarget{0.06, 0.01} : CoverageTarget{0.35, 0.02};
}

[[nodiscard]] inline std::size_t footprint_size(const ImageWithAlpha& placed) {
  return static_cast<std::size_t>(
      std::count_if(placed.alpha.data().begin(), placed.alpha.data().end(), [](double a) { return a > 0.0; }));
}

/// Fully opaque overlay scaled so the mask covers the variant's target fraction of the host.
[[nodiscard]] inline WatermarkedSample synth_alpha1(const Image& host, const ImageWithAlpha& logo,
                                                    Alpha1Variant variant, std::uint64_t seed) {
  Rng rng = sample_rng(seed, 0);
  const auto [target, tol] = coverage_target(variant);
  const double host_px = static_cast<double>(host.pixel_count());
  const double want = target * host_px;

  // Footprint grows with width; bisect on the width in pixels.
  double lo = 1.0;
  double hi = host.width();
  std::optional<ImageWithAlpha> best;
  double best_err = 1e300;
  for (int it = 0; it < 40 && hi - lo > 1e-3; ++it) {
    const double mid = 0.5 * (lo + hi);
    ImageWithAlpha placed = transform_logo(logo, mid, 0.0, true);
    const bool fits = placed.width() <= host.width() && placed.height() <= host.height();
    const double got = static_cast<double>(footprint_size(placed));
    if (fits && std::abs(got - want) < best_err) {
      best_err = std::abs(got - want);
      best = std::move(placed);
    }
    if (!fits || got > want) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (!best || best_err / host_px > tol) {
    throw DegenerateInput("synth_alpha1: coverage " + std::to_string(target) +
                          " unattainable for this logo/host pair");
  }
  WatermarkSpec spec;
  spec.logo = std::move(*best);
  spec.scale = static_cast<double>(spec.logo.width()) / host.width();
  spec.opacity = 1.0;
  spec.position = {uniform_int(rng, 0, host.height() - spec.logo.height()),
                   uniform_int(rng, 0, host.width() - spec.logo.width())};
  return apply_watermark(host, std::move(spec));
}

// ---------------------------------------------------------------------------
// Disorient: a box whose position (N/E/S/W) carries the message

enum class Direction { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::array<Direction, 4> kDirections = {Direction::North, Direction::East, Direction::South,
                                                         Direction::West};

[[nodiscard]] inline std::string_view to_string(Direction d) noexcept {
  switch (d) {
    case Direction::North: return "north";
    case Direction::East: return "east";
    case Direction::South: return "south";
    case Direction::West: return "west";
  }
  return "?";
}

[[nodiscard]] inline Direction parse_direction(std::string_view s) {
  for (const Direction d : kDirections) {
    if (s == to_string(d)) return d;
  }
  throw InvalidArgument("unknown direction '" + std::string(s) + "'");
}

/// Shared by the generator and the classifier. Band centers sit `margin` pixels
/// in from the middle of each edge; boxes jitter along the band by up to
/// `jitter_along` and across it by up to `jitter_across`.
struct DisorientGeometry {
  int size = 256;
  int box = 32;
  int margin = 48;
  int jitter_along = 24;
  int jitter_across = 8;
  Rgb orange{1.0, 0.55, 0.0};
  double gray = 0.5;
  double chroma_tolerance = 0.1;

  [[nodiscard]] std::array<double, 2> band_center(Direction d) const noexcept {
    const double mid = size / 2.0;
    switch (d) {
      case Direction::North: return {static_cast<double>(margin), mid};
      case Direction::South: return {size - static_cast<double>(margin), mid};
      case Direction::West: return {mid, static_cast<double>(margin)};
      case Direction::East: return {mid, size - static_cast<double>(margin)};
    }
    return {mid, mid};
  }

  /// Band for `d` as {top, left, bottom, right}, bottom/right exclusive: the
  /// middle third along the edge and the outer third across it.
  [[nodiscard]] std::array<int, 4> band(Direction d) const noexcept {
    const int lo = size / 3;
    const int hi = size - size / 3;
    switch (d) {
      case Direction::North: return {0, lo, lo, hi};
      case Direction::South: return {hi, lo, size, hi};
      case Direction::West: return {lo, 0, hi, lo};
      case Direction::East: return {lo, hi, hi, size};
    }
    return {0, 0, size, size};
  }
};

struct DisorientSample {
  Image image;
  Direction label = Direction::North;
  BinaryMask mask;
};

namespace detail {

// Lattice value noise, bilinear between cells, summed over a few octaves.
inline Image gray_texture(Rng& rng, int size, double mean) {
  Image img(size, size);
  std::vector<double> acc(static_cast<std::size_t>(size) * size, 0.0);
  double amp = 0.08;
  for (int cell = 64; cell >= 8; cell /= 2, amp *= 0.5) {
    const int n = size / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(n) * n);
    for (double& v : lattice) v = uniform(rng, -1.0, 1.0);
    for (int y = 0; y < size; ++y) {
      const double gy = static_cast<double>(y) / cell;
      const int y0 = static_cast<int>(gy);
      const double ty = gy - y0;
      for (int x = 0; x < size; ++x) {
        const double gx = static_cast<double>(x) / cell;
        const int x0 = static_cast<int>(gx);
        const double tx = gx - x0;
        auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * n + xx]; };
        const double v = (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
                         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
        acc[static_cast<std::size_t>(y) * size + x] += amp * v;
      }
    }
  }
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double v = std::clamp(mean + acc[static_cast<std::size_t>(y) * size + x], 0.0, 1.0);
      for (int c = 0; c < 3; ++c) img(y, x, c) = v;
    }
  }
  return img;
}

}  // namespace detail

/// Draws a box for `label` onto `image` and returns its footprint.
inline BinaryMask draw_box(Image& image, Direction label, Rng& rng, const DisorientGeometry& g) {
  const auto [cy, cx] = g.band_center(label);
  const bool vertical_band = label == Direction::East || label == Direction::West;
  const int along = uniform_int(rng, -g.jitter_along, g.jitter_along);
  const int across = uniform_int(rng, -g.jitter_across, g.jitter_across);
  const int dy = vertical_band ? along : across;
  const int dx = vertical_band ? across : along;
  const int top = static_cast<int>(cy) + dy - g.box / 2;
  const int left = static_cast<int>(cx) + dx - g.box / 2;
  BinaryMask mask(image.height(), image.width());
  for (int y = top; y < top + g.box; ++y) {
    for (int x = left; x < left + g.box; ++x) {
      if (!image.in_bounds(y, x)) continue;
      image(y, x, 0) = g.orange.r;
      image(y, x, 1) = g.orange.g;
      image(y, x, 2) = g.orange.b;
      mask(y, x) = 1;
    }
  }
  return mask;
}

[[nodiscard]] inline DisorientSample synth_disorient(std::uint64_t seed, std::optional<Direction> forced = std::nullopt,
                                                     bool textured = false, const DisorientGeometry& g = {}) {
  Rng rng = sample_rng(seed, 0);
  DisorientSample out;
  out.label = forced ? *forced : kDirections[uniform_int(rng, 0, 3)];
  out.image = textured ? detail::gray_texture(rng, g.size, g.gray) : filled_image(g.size, g.size, {g.gray, g.gray, g.gray});
  out.mask = draw_box(out.image, out.label, rng, g);
  return out;
}

class NoMarkerFound : public DegenerateInput {
 public:
  using DegenerateInput::DegenerateInput;
};

/// Centroid of orange pixels snapped to the nearest band center.
[[nodiscard]] inline Direction classify_position(const Image& image, const DisorientGeometry& g = {}) {
  const ProbMask hits = chroma_mask(image, {g.orange, g.chroma_tolerance});
  double sy = 0.0;
  double sx = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (hits(y, x) == 0.0) continue;
      sy += y + 0.5;
      sx += x + 0.5;
      ++n;
    }
  }
  if (n == 0) throw NoMarkerFound("no orange pixels found");
  // Band centers are expressed for a `g.size` square; rescale to this image.
  const double cy = sy / n * g.size / image.height();
  const double cx = sx / n * g.size / image.width();
  Direction best = Direction::North;
  double best_d2 = 1e300;
  for (const Direction d : kDirections) {
    const auto [by, bx] = g.band_center(d);
    const double d2 = (cy - by) * (cy - by) + (cx - bx) * (cx - bx);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = d;
    }
  }
  return best;
}

struct DisorientResult {
  Image image;
  Direction old_label = Direction::North;
  Direction new_label = Direction::North;
  BinaryMask removal_mask;
  BinaryMask new_mask;
  std::vector<std::string> warnings;
};

/// Removal settings for box markers: chroma masks are exact, one pixel of
/// dilation absorbs any edge blending.
[[nodiscard]] inline PipelineConfig disorient_config() {
  PipelineConfig c;
  c.d = 1;
  return c;
}

/// Predicts the box position, removes the box, and draws a new one in one of
/// the other three positions chosen uniformly.
[[nodiscard]] inline DisorientResult disorient(const Image& image, const inpaint::InpaintBackend& backend,
                                               std::uint64_t seed,
                                               const PipelineConfig& cfg = disorient_config(),
                                               const DisorientGeometry& g = {}) {
  Rng rng = sample_rng(seed, 1);
  DisorientResult out;
  out.old_label = classify_position(image, g);
  PipelineResult removed = morphomod(image, source::Chroma{g.orange, g.chroma_tolerance}, cfg, backend);
  out.warnings = std::move(removed.warnings);
  out.removal_mask = std::move(removed.mask);
  const int pick = uniform_int(rng, 0, 2);
  int k = 0;
  for (const Direction d : kDirections) {
    if (d == out.old_label) continue;
    if (k++ == pick) out.new_label = d;
  }
  out.image = std::move(removed.restored);
  out.new_mask = draw_box(out.image, out.new_label, rng, g);
  return out;
}

}  // namespace morphomod::datagen
