#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "morphomod/errors.hpp"
#include "morphomod/inpaint.hpp"
#include "morphomod/morphology.hpp"
#include "morphomod/png_io.hpp"
#include "morphomod/raster.hpp"

namespace morphomod {

namespace source {

/// Initial mask read from a PNG (luminance, 255 = watermark).
struct FromFile {
  std::filesystem::path path;
};

/// Pixels whose every channel lies within `tolerance` of `target`.
struct Chroma {
  Rgb target;
  double tolerance = 0.1;
};

/// Mask produced elsewhere, e.g. by an external segmentation model.
struct Provided {
  ProbMask mask;
};

}  // namespace source

using SegmentSource = std::variant<source::FromFile, source::Chroma, source::Provided>;

struct PipelineConfig {
  int d = 3;
  KernelShape kernel = KernelShape::Square;
  std::string prompt = std::string(inpaint::kPrompts.front());
  std::string backend = "harmonic";
  FillStrategy fill = FillStrategy::AverageBackground;
  double threshold = 0.5;
  double tolerance = 1e-5;
  std::optional<int> max_iterations;
  int steps = 50;

  void validate() const {
    if (d < 0) throw InvalidArgument("dilation parameter d must be >= 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidArgument("mask threshold must lie in [0,1]");
  }
};

enum class Stage { Segment, Inpaint, Restore };

[[nodiscard]] inline const char* to_string(Stage s) noexcept {
  switch (s) {
    case Stage::Segment: return "segment";
    case Stage::Inpaint: return "inpaint";
    case Stage::Restore: return "restore";
  }
  return "?";
}

/// Failure inside one pipeline stage; what() is prefixed with the stage name.
class StageError : public Error {
 public:
  StageError(Stage stage, const std::string& message)
      : Error(std::string(to_string(stage)) + ": " + message), stage_(stage) {}
  [[nodiscard]] Stage stage() const noexcept { return stage_; }

 private:
  Stage stage_;
};

/// Soft mask of pixels matching a target color channel-wise within `tolerance`.
[[nodiscard]] inline ProbMask chroma_mask(const Image& x, const source::Chroma& chroma) {
  ProbMask out(x.height(), x.width());
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      bool hit = true;
      for (int c = 0; c < 3 && hit; ++c) hit = std::abs(x(y, xx, c) - chroma.target[c]) <= chroma.tolerance;
      out(y, xx) = hit ? 1.0 : 0.0;
    }
  }
  return out;
}

[[nodiscard]] inline ProbMask resolve_source(const Image& x, const SegmentSource& src) {
  ProbMask mask = std::visit(
      [&](const auto& s) -> ProbMask {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, source::FromFile>) {
          return io::load_mask(s.path);
        } else if constexpr (std::is_same_v<T, source::Chroma>) {
          return chroma_mask(x, s);
        } else {
          return s.mask;
        }
      },
      src);
  require_same_shape(x, mask, "segment source");
  return mask;
}

struct SegmentResult {
  BinaryMask mask;
  /// Set when the initial mask is empty ("no watermark detected").
  bool empty = false;
};

/// Initial mask -> binarize(threshold) -> dilate(kernel(d)).
[[nodiscard]] inline SegmentResult segment(const Image& x, const SegmentSource& src, int d,
                                           KernelShape shape = KernelShape::Square, double threshold = 0.5) {
  const BinaryMask initial = binarize(resolve_source(x, src), threshold);
  SegmentResult out;
  out.empty = count(initial) == 0;
  out.mask = dilate(initial, make_kernel(d, shape));
  return out;
}

/// x * (1 - m) + x_hat * m.
[[nodiscard]] inline Image restore(const Image& x, const BinaryMask& m, const Image& x_hat) {
  require_same_shape(x, m, "restore");
  require_same_shape(x, x_hat, "restore");
  Image out = x;
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      if (!m(y, xx)) continue;
      for (int c = 0; c < 3; ++c) out(y, xx, c) = x_hat(y, xx, c);
    }
  }
  return out;
}

struct PipelineResult {
  Image restored;
  BinaryMask mask;
  Image inpainted;
  std::vector<std::string> warnings;
};

/// Segment, inpaint and restore with an already-resolved backend.
[[nodiscard]] inline PipelineResult morphomod(const Image& x, const SegmentSource& src,
                                              const PipelineConfig& cfg,
                                              const inpaint::InpaintBackend& backend) {
  cfg.validate();
  PipelineResult out;

  SegmentResult seg;
  try {
    seg = segment(x, src, cfg.d, cfg.kernel, cfg.threshold);
  } catch (const Error& e) {
    throw StageError(Stage::Segment, e.what());
  }
  out.mask = std::move(seg.mask);
  if (seg.empty) {
    out.warnings.emplace_back("no watermark detected: initial mask is empty");
    out.inpainted = x;
    out.restored = x;
    return out;
  }

  try {
    inpaint::InpaintRequest req{x, out.mask, cfg.prompt, {}};
    req.options.fill = cfg.fill;
    req.options.tolerance = cfg.tolerance;
    req.options.max_iterations = cfg.max_iterations;
    req.options.steps = cfg.steps;
    req.image = prefill(x, out.mask, cfg.fill);
    inpaint::InpaintResult res = backend.inpaint(req);
    for (auto& w : res.warnings) out.warnings.push_back(std::move(w));
    out.inpainted = std::move(res.image);
  } catch (const Error& e) {
    throw StageError(Stage::Inpaint, e.what());
  }

  try {
    out.restored = restore(x, out.mask, out.inpainted);
  } catch (const Error& e) {
    throw StageError(Stage::Restore, e.what());
  }
  return out;
}

[[nodiscard]] inline PipelineResult morphomod(const Image& x, const SegmentSource& src,
                                              const PipelineConfig& cfg) {
  inpaint::BackendHandle backend;
  try {
    backend = inpaint::select_backend(cfg.backend);
  } catch (const Error& e) {
    throw StageError(Stage::Inpaint, e.what());
  }
  return morphomod(x, src, cfg, *backend);
}

/// Writes `<prefix>.mask.png`, `<prefix>.inpainted.png` and `<prefix>.restored.png`.
inline void dump_stages(const PipelineResult& r, const std::filesystem::path& prefix) {
  const std::string base = prefix.string();
  io::save_png(r.mask, base + ".mask.png");
  io::save_png(r.inpainted, base + ".inpainted.png");
  io::save_png(r.restored, base + ".restored.png");
}

}  // namespace morphomod
