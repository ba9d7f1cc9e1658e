#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "morphomod/detail/base64.hpp"
#include "morphomod/errors.hpp"
#include "morphomod/png_io.hpp"
#include "morphomod/raster.hpp"

namespace morphomod::inpaint {

/// Inpainting prompts evaluated for diffusion backends. The first entry is the default.
inline constexpr std::array<std::string_view, 10> kPrompts = {
    "Remove.",
    "Fill in the background.",
    "Erase the mark and restore the original.",
    "Blend into the surrounding area.",
    "Reconstruct the missing details.",
    "Remove the object and match the background.",
    "Fill in the gaps as if the mark was never there.",
    "Smooth out and complete the scene.",
    "Mend the area to look natural.",
    "Restore the natural texture.",
};

struct InpaintOptions {
  FillStrategy fill = FillStrategy::AverageBackground;
  double tolerance = 1e-5;
  /// Defaults to 10 * (height + width) when unset.
  std::optional<int> max_iterations;
  int steps = 50;
  /// Per-request timeout for remote backends.
  double timeout_seconds = 120.0;
};

struct InpaintRequest {
  Image image;
  BinaryMask mask;  // 1 = synthesize
  std::string prompt;
  InpaintOptions options;
};

struct InpaintResult {
  Image image;
  bool degenerate = false;
  bool converged = true;
  int iterations = 0;
  double final_update = 0.0;
  std::vector<std::string> warnings;
};

class InpaintBackend {
 public:
  virtual ~InpaintBackend() = default;
  [[nodiscard]] virtual InpaintResult inpaint(const InpaintRequest& request) const = 0;
  [[nodiscard]] virtual std::string id() const = 0;
};

using BackendHandle = std::shared_ptr<const InpaintBackend>;

inline void validate(const InpaintRequest& req) {
  require_same_shape(req.image, req.mask, "inpaint request");
}

namespace detail {

struct HoleComponent {
  int min_y, max_y, min_x, max_x;
};

// 4-connected components of the mask, labels stored per pixel (-1 = unmasked).
inline std::vector<HoleComponent> label_holes(const BinaryMask& mask, std::vector<int>& labels) {
  const int h = mask.height();
  const int w = mask.width();
  labels.assign(mask.pixel_count(), -1);
  std::vector<HoleComponent> comps;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x) || labels[static_cast<std::size_t>(y) * w + x] >= 0) continue;
      const int id = static_cast<int>(comps.size());
      HoleComponent comp{y, y, x, x};
      stack.emplace_back(y, x);
      labels[static_cast<std::size_t>(y) * w + x] = id;
      while (!stack.empty()) {
        const auto [cy, cx] = stack.back();
        stack.pop_back();
        comp.min_y = std::min(comp.min_y, cy);
        comp.max_y = std::max(comp.max_y, cy);
        comp.min_x = std::min(comp.min_x, cx);
        comp.max_x = std::max(comp.max_x, cx);
        constexpr std::array<std::pair<int, int>, 4> kSteps{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
        for (const auto& [dy, dx] : kSteps) {
          const int ny = cy + dy;
          const int nx = cx + dx;
          if (ny < 0 || ny >= h || nx < 0 || nx >= w || !mask(ny, nx)) continue;
          int& l = labels[static_cast<std::size_t>(ny) * w + nx];
          if (l >= 0) continue;
          l = id;
          stack.emplace_back(ny, nx);
        }
      }
      comps.push_back(comp);
    }
  }
  return comps;
}

// Over-relaxation factor for a hole whose bounding box spans `extent` pixels.
// Doubling the extent accounts for free (image-border) sides of the hole.
inline double relaxation_for(int extent) {
  const double s = std::sin(std::numbers::pi / (2.0 * extent + 1.0));
  return 2.0 / (1.0 + s);
}

}  // namespace detail

/// Fills masked pixels with the solution of the discrete Laplace equation
/// (4-neighbour stencil) using the unmasked pixels as Dirichlet data.
/// Neighbours outside the image are omitted from the average.
///
/// Solved by successive over-relaxation in a fixed raster order, seeded with
/// prefill(image, mask, options.fill). Iteration stops once the largest
/// per-sample update drops below options.tolerance * (2 - omega) / 10, which
/// keeps the remaining error well under the tolerance.
[[nodiscard]] inline InpaintResult inpaint_harmonic(const InpaintRequest& req) {
  validate(req);
  if (!(req.options.tolerance > 0.0)) throw InvalidArgument("harmonic inpainting: tolerance must be > 0");

  InpaintResult result;
  const BinaryMask& mask = req.mask;
  const std::size_t holes = count(mask);
  if (!req.prompt.empty()) result.warnings.push_back("prompt ignored by the harmonic backend");
  if (holes == 0) {
    result.image = req.image;
    return result;
  }
  if (holes == mask.pixel_count()) {
    result.degenerate = true;
    result.converged = false;
    result.warnings.push_back("mask covers the whole image: no boundary data");
    try {
      result.image = prefill(req.image, mask, req.options.fill);
    } catch (const DegenerateInput&) {
      result.image = prefill(req.image, mask, FillStrategy::Gray);
    }
    return result;
  }

  const int h = req.image.height();
  const int w = req.image.width();
  std::vector<int> labels;
  const auto comps = detail::label_holes(mask, labels);
  std::vector<double> omega(comps.size());
  double max_omega = 1.0;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const int extent = std::max(comps[i].max_y - comps[i].min_y, comps[i].max_x - comps[i].min_x) + 1;
    omega[i] = detail::relaxation_for(extent);
    max_omega = std::max(max_omega, omega[i]);
  }

  struct Cell {
    std::size_t index;
    double omega;
    std::array<std::size_t, 4> nbr;
    int n;
  };
  std::vector<Cell> cells;
  cells.reserve(holes);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      Cell cell{static_cast<std::size_t>(y) * w + x, omega[labels[static_cast<std::size_t>(y) * w + x]], {}, 0};
      if (y > 0) cell.nbr[cell.n++] = cell.index - w;
      if (y + 1 < h) cell.nbr[cell.n++] = cell.index + w;
      if (x > 0) cell.nbr[cell.n++] = cell.index - 1;
      if (x + 1 < w) cell.nbr[cell.n++] = cell.index + 1;
      cells.push_back(cell);
    }
  }

  Image field = prefill(req.image, mask, req.options.fill);
  auto data = field.data();
  const int max_iter = req.options.max_iterations.value_or(10 * (h + w));
  const double stop = 0.1 * req.options.tolerance * (2.0 - max_omega);

  result.converged = false;
  for (int it = 1; it <= max_iter; ++it) {
    double max_update = 0.0;
    for (const Cell& cell : cells) {
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int k = 0; k < cell.n; ++k) sum += data[cell.nbr[k] * 3 + c];
        double& v = data[cell.index * 3 + c];
        const double delta = cell.omega * (sum / cell.n - v);
        v += delta;
        max_update = std::max(max_update, std::abs(delta));
      }
    }
    result.iterations = it;
    result.final_update = max_update;
    if (max_update < stop) {
      result.converged = true;
      break;
    }
  }
  if (!result.converged) {
    result.warnings.push_back("harmonic solver hit the iteration cap (" + std::to_string(max_iter) +
                              ") with last update " + std::to_string(result.final_update));
  }
  for (const Cell& cell : cells) {
    for (int c = 0; c < 3; ++c) {
      double& v = data[cell.index * 3 + c];
      v = std::clamp(v, 0.0, 1.0);
    }
  }
  result.image = std::move(field);
  return result;
}

class HarmonicBackend final : public InpaintBackend {
 public:
  [[nodiscard]] InpaintResult inpaint(const InpaintRequest& request) const override {
    return inpaint_harmonic(request);
  }
  [[nodiscard]] std::string id() const override { return "harmonic"; }
};

// ---------------------------------------------------------------------------
// Remote backend

class RemoteError : public Error {
 public:
  enum class Kind { Network, HttpStatus, InvalidPayload, DimensionMismatch };

  RemoteError(Kind kind, std::string message, int status = 0)
      : Error(std::move(message)), kind_(kind), status_(status) {}

  [[nodiscard]] Kind kind() const noexcept { return kind_; }
  /// HTTP status for Kind::HttpStatus, 0 otherwise.
  [[nodiscard]] int status() const noexcept { return status_; }

 private:
  Kind kind_;
  int status_;
};

/// JSON body of POST {endpoint}/inpaint.
[[nodiscard]] inline nlohmann::json make_wire_request(const InpaintRequest& req) {
  const auto image_png = io::encode_png(req.image);
  const auto mask_png = io::encode_png(req.mask);
  return {
      {"image", morphomod::detail::base64_encode(image_png)},
      {"mask", morphomod::detail::base64_encode(mask_png)},
      {"prompt", req.prompt},
      {"steps", req.options.steps},
  };
}

/// Decodes a 200 response body into an image of the requested dimensions.
[[nodiscard]] inline Image parse_wire_response(std::string_view body, int height, int width) {
  using Kind = RemoteError::Kind;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw RemoteError(Kind::InvalidPayload, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("image") || !j["image"].is_string()) {
    throw RemoteError(Kind::InvalidPayload, "response lacks a string 'image' field");
  }
  const auto bytes = morphomod::detail::base64_decode(j["image"].get_ref<const std::string&>());
  if (!bytes) throw RemoteError(Kind::InvalidPayload, "response 'image' is not valid base64");
  Image image;
  try {
    image = io::decode_image(*bytes);
  } catch (const Error& e) {
    throw RemoteError(Kind::InvalidPayload, std::string("response 'image' is not a PNG: ") + e.what());
  }
  if (image.height() != height || image.width() != width) {
    throw RemoteError(Kind::DimensionMismatch,
                      "remote returned " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                          ", expected " + std::to_string(height) + "x" + std::to_string(width));
  }
  return image;
}

/// Sends the request to `endpoint` (e.g. "http://localhost:8008") and decodes the reply.
[[nodiscard]] inline Image inpaint_remote(const InpaintRequest& req, const std::string& endpoint) {
  using Kind = RemoteError::Kind;
  validate(req);
  if (req.options.steps < 1) throw InvalidArgument("remote inpainting: steps must be >= 1");

  httplib::Client client(endpoint);
  if (!client.is_valid()) throw RemoteError(Kind::Network, "invalid endpoint '" + endpoint + "'");
  const auto secs = static_cast<time_t>(req.options.timeout_seconds);
  client.set_connection_timeout(std::min<time_t>(secs, 10), 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);

  const std::string body = make_wire_request(req).dump();
  const auto res = client.Post("/inpaint", body, "application/json");
  if (!res) {
    throw RemoteError(Kind::Network, "POST " + endpoint + "/inpaint failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    std::string detail = res->body;
    try {
      const auto j = nlohmann::json::parse(res->body);
      if (j.is_object() && j.contains("error") && j["error"].is_string()) detail = j["error"].get<std::string>();
    } catch (const nlohmann::json::exception&) {
    }
    throw RemoteError(Kind::HttpStatus,
                      "remote returned HTTP " + std::to_string(res->status) + ": " + detail, res->status);
  }
  return parse_wire_response(res->body, req.image.height(), req.image.width());
}

class RemoteBackend final : public InpaintBackend {
 public:
  explicit RemoteBackend(std::string endpoint) : endpoint_(std::move(endpoint)) {
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
  }

  [[nodiscard]] InpaintResult inpaint(const InpaintRequest& request) const override {
    InpaintResult result;
    result.image = inpaint_remote(request, endpoint_);
    return result;
  }
  [[nodiscard]] std::string id() const override { return "remote:" + endpoint_; }
  [[nodiscard]] const std::string& endpoint() const noexcept { return endpoint_; }

 private:
  std::string endpoint_;
};

/// "harmonic" or "remote:<url>".
[[nodiscard]] inline BackendHandle select_backend(std::string_view id) {
  if (id == "harmonic") return std::make_shared<HarmonicBackend>();
  constexpr std::string_view kRemote = "remote:";
  if (id.starts_with(kRemote) && id.size() > kRemote.size()) {
    return std::make_shared<RemoteBackend>(std::string(id.substr(kRemote.size())));
  }
  throw InvalidArgument("unknown inpaint backend '" + std::string(id) +
                        "'; valid ids: harmonic, remote:<url>");
}

}  // namespace morphomod::inpaint
