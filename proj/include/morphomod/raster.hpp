#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "morphomod/errors.hpp"

namespace morphomod {

/// Dense row-major raster with `Channels` interleaved samples per pixel.
template <typename T, int Channels>
class Raster {
 public:
  using value_type = T;
  static constexpr int channels = Channels;

  Raster() = default;

  Raster(int height, int width, T fill = T{})
      : height_(checked_dim(height)), width_(checked_dim(width)),
        data_(static_cast<std::size_t>(height) * width * Channels, fill) {}

  Raster(int height, int width, std::vector<T> data)
      : height_(checked_dim(height)), width_(checked_dim(width)), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(height) * width * Channels) {
      throw DimensionMismatch("raster data length does not match height*width*channels");
    }
  }

  [[nodiscard]] int height() const noexcept { return height_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

  [[nodiscard]] T& operator()(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  [[nodiscard]] const T& operator()(int y, int x, int c = 0) const noexcept {
    return data_[index(y, x, c)];
  }

  [[nodiscard]] std::span<T> data() noexcept { return data_; }
  [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

  [[nodiscard]] bool in_bounds(int y, int x) const noexcept {
    return y >= 0 && y < height_ && x >= 0 && x < width_;
  }

  template <typename U, int C>
  [[nodiscard]] bool same_shape(const Raster<U, C>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  static int checked_dim(int v) {
    if (v < 0) throw InvalidArgument("raster dimensions must be non-negative");
    return v;
  }
  [[nodiscard]] std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * Channels + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// RGB image, linear values in [0,1].
using Image = Raster<double, 3>;
/// Soft mask in [0,1].
using ProbMask = Raster<double, 1>;
/// Hard mask, every sample exactly 0 or 1. 1 marks watermark / region of interest.
using BinaryMask = Raster<std::uint8_t, 1>;

struct ImageWithAlpha {
  Image rgb;
  ProbMask alpha;

  [[nodiscard]] int height() const noexcept { return rgb.height(); }
  [[nodiscard]] int width() const noexcept { return rgb.width(); }
};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  [[nodiscard]] double operator[](int c) const noexcept { return c == 0 ? r : (c == 1 ? g : b); }
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct PixelOrigin {
  int y = 0;
  int x = 0;
};

enum class FillStrategy { None, White, Black, Gray, AverageBackground };

template <typename U, int C1, typename V, int C2>
void require_same_shape(const Raster<U, C1>& a, const Raster<V, C2>& b, std::string_view what) {
  if (!a.same_shape(b)) {
    throw DimensionMismatch(std::string(what) + ": dimensions differ (" +
                            std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                            std::to_string(b.height()) + "x" + std::to_string(b.width()) + ")");
  }
}

/// Number of set pixels.
[[nodiscard]] inline std::size_t count(const BinaryMask& m) noexcept {
  return static_cast<std::size_t>(std::count(m.data().begin(), m.data().end(), std::uint8_t{1}));
}

/// Fraction of set pixels in [0,1]; 0 for an empty raster.
[[nodiscard]] inline double coverage(const BinaryMask& m) noexcept {
  return m.pixel_count() == 0 ? 0.0 : static_cast<double>(count(m)) / m.pixel_count();
}

/// True when every set pixel of `inner` is also set in `outer`.
[[nodiscard]] inline bool is_subset(const BinaryMask& inner, const BinaryMask& outer) {
  require_same_shape(inner, outer, "is_subset");
  const auto a = inner.data();
  const auto b = outer.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] && !b[i]) return false;
  }
  return true;
}

[[nodiscard]] inline Image filled_image(int height, int width, Rgb color) {
  Image img(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img(y, x, 0) = color.r;
      img(y, x, 1) = color.g;
      img(y, x, 2) = color.b;
    }
  }
  return img;
}

/// Alpha-blends `overlay` onto `base` with its top-left corner at `origin`.
/// Effective alpha is overlay alpha times `opacity_scale`. Parts of the overlay
/// outside `base` are clipped.
[[nodiscard]] inline Image composite(const Image& base, const ImageWithAlpha& overlay,
                                     PixelOrigin origin, double opacity_scale) {
  require_same_shape(overlay.rgb, overlay.alpha, "composite overlay");
  if (!(opacity_scale >= 0.0 && opacity_scale <= 1.0)) {
    throw InvalidArgument("composite: opacity_scale must lie in [0,1]");
  }
  Image out = base;
  if (opacity_scale == 0.0) return out;

  const int y0 = std::max(0, origin.y);
  const int x0 = std::max(0, origin.x);
  const int y1 = std::min(base.height(), origin.y + overlay.height());
  const int x1 = std::min(base.width(), origin.x + overlay.width());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const int oy = y - origin.y;
      const int ox = x - origin.x;
      const double a = overlay.alpha(oy, ox) * opacity_scale;
      if (a == 0.0) continue;
      for (int c = 0; c < 3; ++c) {
        const double v = a * overlay.rgb(oy, ox, c) + (1.0 - a) * base(y, x, c);
        out(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

/// Per-channel mean over pixels where `mask` is 0.
[[nodiscard]] inline Rgb background_mean(const Image& image, const BinaryMask& mask) {
  require_same_shape(image, mask, "background_mean");
  std::array<double, 3> sum{};
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask(y, x)) continue;
      for (int c = 0; c < 3; ++c) sum[c] += image(y, x, c);
      ++n;
    }
  }
  if (n == 0) throw DegenerateInput("mask covers the whole image: no background pixels");
  return {sum[0] / n, sum[1] / n, sum[2] / n};
}

/// Replaces masked pixels according to `strategy`; unmasked pixels are copied unchanged.
[[nodiscard]] inline Image prefill(const Image& image, const BinaryMask& mask, FillStrategy strategy) {
  require_same_shape(image, mask, "prefill");
  Rgb color;
  switch (strategy) {
    case FillStrategy::None:
      return image;
    case FillStrategy::White:
      color = {1.0, 1.0, 1.0};
      break;
    case FillStrategy::Black:
      color = {0.0, 0.0, 0.0};
      break;
    case FillStrategy::Gray:
      color = {0.5, 0.5, 0.5};
      break;
    case FillStrategy::AverageBackground:
      color = background_mean(image, mask);
      break;
  }
  Image out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!mask(y, x)) continue;
      for (int c = 0; c < 3; ++c) out(y, x, c) = color[c];
    }
  }
  return out;
}

[[nodiscard]] inline std::string_view to_string(FillStrategy s) noexcept {
  switch (s) {
    case FillStrategy::None: return "none";
    case FillStrategy::White: return "white";
    case FillStrategy::Black: return "black";
    case FillStrategy::Gray: return "gray";
    case FillStrategy::AverageBackground: return "avg-bg";
  }
  return "none";
}

[[nodiscard]] inline FillStrategy parse_fill_strategy(std::string_view s) {
  if (s == "none") return FillStrategy::None;
  if (s == "white") return FillStrategy::White;
  if (s == "black") return FillStrategy::Black;
  if (s == "gray" || s == "grey") return FillStrategy::Gray;
  if (s == "avg-bg" || s == "average" || s == "avg") return FillStrategy::AverageBackground;
  throw InvalidArgument("unknown fill strategy '" + std::string(s) +
                        "' (expected none, white, black, gray, avg-bg)");
}

/// Parses "#rrggbb" or "rrggbb" into a color in [0,1].
[[nodiscard]] inline Rgb parse_hex_color(std::string_view hex) {
  if (!hex.empty() && hex.front() == '#') hex.remove_prefix(1);
  if (hex.size() != 6) throw InvalidArgument("color must be 6 hex digits: '" + std::string(hex) + "'");
  auto nibble = [&](char ch) -> int {
    if (ch >= '0' && ch <= '9') return ch - '0';
    if (ch >= 'a' && ch <= 'f') return ch - 'a' + 10;
    if (ch >= 'A' && ch <= 'F') return ch - 'A' + 10;
    throw InvalidArgument("invalid hex digit in color '" + std::string(hex) + "'");
  };
  std::array<double, 3> v{};
  for (int c = 0; c < 3; ++c) {
    v[c] = (nibble(hex[2 * c]) * 16 + nibble(hex[2 * c + 1])) / 255.0;
  }
  return {v[0], v[1], v[2]};
}

}  // namespace morphomod
