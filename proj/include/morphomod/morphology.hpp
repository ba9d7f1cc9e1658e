#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "morphomod/errors.hpp"
#include "morphomod/raster.hpp"

namespace morphomod {

enum class KernelShape { Square, Disk };

struct Offset {
  int dy = 0;
  int dx = 0;
  friend bool operator==(const Offset&, const Offset&) = default;
  friend auto operator<=>(const Offset&, const Offset&) = default;
};

/// Binary structuring element. Square: max(|dy|,|dx|) <= d. Disk: dy^2 + dx^2 <= d^2.
class StructuringElement {
 public:
  StructuringElement(KernelShape shape, int d) : shape_(shape), d_(d) {
    if (d < 0) throw InvalidArgument("dilation parameter d must be non-negative, got " + std::to_string(d));
    for (int dy = -d; dy <= d; ++dy) {
      const int w = half_width(dy);
      for (int dx = -w; dx <= w; ++dx) footprint_.push_back({dy, dx});
    }
  }

  [[nodiscard]] KernelShape shape() const noexcept { return shape_; }
  [[nodiscard]] int d() const noexcept { return d_; }
  [[nodiscard]] const std::vector<Offset>& footprint() const noexcept { return footprint_; }
  [[nodiscard]] std::size_t size() const noexcept { return footprint_.size(); }

  /// Horizontal half-extent of the footprint on row `dy` (|dy| <= d).
  [[nodiscard]] int half_width(int dy) const noexcept {
    if (shape_ == KernelShape::Square) return d_;
    const long long rem = static_cast<long long>(d_) * d_ - static_cast<long long>(dy) * dy;
    auto w = static_cast<int>(std::sqrt(static_cast<double>(rem)));
    while (static_cast<long long>(w + 1) * (w + 1) <= rem) ++w;
    while (static_cast<long long>(w) * w > rem) --w;
    return w;
  }

 private:
  KernelShape shape_;
  int d_;
  std::vector<Offset> footprint_;
};

[[nodiscard]] inline StructuringElement make_kernel(int d, KernelShape shape = KernelShape::Square) {
  return StructuringElement(shape, d);
}

/// Point reflection of the footprint. Square and disk elements are symmetric,
/// so this is the identity on every element this library constructs.
[[nodiscard]] inline StructuringElement reflect(const StructuringElement& k) { return k; }

/// How pixels outside the image read during erosion.
enum class Border { Zero, One };

namespace detail {

// Row-wise prefix sums, one extra column: sums[y][x] = number of set pixels in row y before x.
struct RowPrefix {
  int height;
  int width;
  std::vector<int> sums;

  explicit RowPrefix(const BinaryMask& m)
      : height(m.height()), width(m.width()),
        sums(static_cast<std::size_t>(m.height()) * (m.width() + 1), 0) {
    for (int y = 0; y < height; ++y) {
      int* row = &sums[static_cast<std::size_t>(y) * (width + 1)];
      for (int x = 0; x < width; ++x) row[x + 1] = row[x] + m(y, x);
    }
  }

  // Set pixels in row y over columns [x0, x1], clipped to the image.
  [[nodiscard]] int range(int y, int x0, int x1) const noexcept {
    x0 = std::max(x0, 0);
    x1 = std::min(x1, width - 1);
    if (x0 > x1) return 0;
    const int* row = &sums[static_cast<std::size_t>(y) * (width + 1)];
    return row[x1 + 1] - row[x0];
  }
};

// One separable pass for a square window: out = 1 iff any set pixel within
// `radius` along the given axis. Out-of-bounds reads as 0.
inline BinaryMask max_pass(const BinaryMask& in, int radius, bool horizontal) {
  const int h = in.height();
  const int w = in.width();
  BinaryMask out(h, w);
  if (horizontal) {
    std::vector<int> prefix(static_cast<std::size_t>(w) + 1);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + in(y, x);
      for (int x = 0; x < w; ++x) {
        const int lo = std::max(0, x - radius);
        const int hi = std::min(w - 1, x + radius);
        out(y, x) = prefix[hi + 1] - prefix[lo] > 0 ? 1 : 0;
      }
    }
  } else {
    std::vector<int> prefix(static_cast<std::size_t>(h) + 1);
    for (int x = 0; x < w; ++x) {
      for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + in(y, x);
      for (int y = 0; y < h; ++y) {
        const int lo = std::max(0, y - radius);
        const int hi = std::min(h - 1, y + radius);
        out(y, x) = prefix[hi + 1] - prefix[lo] > 0 ? 1 : 0;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Binary dilation: out(p) = max over footprint offsets o of in(p - o), with
/// pixels outside the image reading as 0.
[[nodiscard]] inline BinaryMask dilate(const BinaryMask& mask, const StructuringElement& k) {
  if (k.d() == 0 || mask.empty()) return mask;
  if (k.shape() == KernelShape::Square) {
    return detail::max_pass(detail::max_pass(mask, k.d(), true), k.d(), false);
  }
  // Disk: union over kernel rows of a horizontal run test, O(HW(2d+1)).
  const detail::RowPrefix rows(mask);
  const int d = k.d();
  BinaryMask out(mask.height(), mask.width());
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      std::uint8_t hit = 0;
      for (int dy = -d; dy <= d && !hit; ++dy) {
        const int sy = y - dy;
        if (sy < 0 || sy >= mask.height()) continue;
        const int hw = k.half_width(dy);
        if (rows.range(sy, x - hw, x + hw) > 0) hit = 1;
      }
      out(y, x) = hit;
    }
  }
  return out;
}

/// Binary erosion: out(p) = min over footprint offsets o of in(p + o). Pixels
/// outside the image read as 0 by default, so anything within reach of the
/// border erodes away; Border::One gives the exact complement-dual of dilate.
[[nodiscard]] inline BinaryMask erode(const BinaryMask& mask, const StructuringElement& k,
                                     Border border = Border::Zero) {
  if (k.d() == 0 || mask.empty()) return mask;
  const detail::RowPrefix rows(mask);
  const int d = k.d();
  const int h = mask.height();
  const int w = mask.width();
  BinaryMask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool all = true;
      for (int dy = -d; dy <= d && all; ++dy) {
        const int sy = y + dy;
        const int hw = k.half_width(dy);
        const int x0 = x - hw;
        const int x1 = x + hw;
        if (sy < 0 || sy >= h) {
          all = border == Border::One;
          continue;
        }
        if (border == Border::Zero && (x0 < 0 || x1 >= w)) {
          all = false;
          continue;
        }
        const int lo = std::max(x0, 0);
        const int hi = std::min(x1, w - 1);
        if (rows.range(sy, lo, hi) != hi - lo + 1) all = false;
      }
      out(y, x) = all ? 1 : 0;
    }
  }
  return out;
}

/// out = 1 iff value >= threshold.
[[nodiscard]] inline BinaryMask binarize(const ProbMask& mask, double threshold = 0.5) {
  BinaryMask out(mask.height(), mask.width());
  const auto src = mask.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= threshold ? 1 : 0;
  return out;
}

[[nodiscard]] inline BinaryMask invert(const BinaryMask& mask) {
  BinaryMask out(mask.height(), mask.width());
  const auto src = mask.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] ? 0 : 1;
  return out;
}

/// Hard mask as a ProbMask with values in {0, 1}.
[[nodiscard]] inline ProbMask to_prob(const BinaryMask& mask) {
  ProbMask out(mask.height(), mask.width());
  const auto src = mask.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  return out;
}

[[nodiscard]] inline std::string_view to_string(KernelShape s) noexcept {
  return s == KernelShape::Square ? "square" : "disk";
}

[[nodiscard]] inline KernelShape parse_kernel_shape(std::string_view s) {
  if (s == "square") return KernelShape::Square;
  if (s == "disk") return KernelShape::Disk;
  throw InvalidArgument("unknown kernel shape '" + std::string(s) + "' (expected square or disk)");
}

}  // namespace morphomod
