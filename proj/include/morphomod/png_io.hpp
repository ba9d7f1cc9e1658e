#pragma once

// PNG encode/decode on top of libpng. Samples map linearly to [0,1]
// (byte / 255 or word / 65535); no gamma or color-management is applied.

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "morphomod/errors.hpp"
#include "morphomod/raster.hpp"

namespace morphomod::io {

/// Raw decoded samples, before conversion to doubles.
struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;   // 1 gray, 2 gray+alpha, 3 rgb, 4 rgba
  int bit_depth = 0;  // 8 or 16
  std::vector<std::uint16_t> samples;

  [[nodiscard]] double max_value() const noexcept { return bit_depth == 16 ? 65535.0 : 255.0; }
  [[nodiscard]] bool has_alpha() const noexcept { return channels == 2 || channels == 4; }
};

namespace detail {

struct PngErrorState {
  char message[256] = {};
  bool unsupported_depth = false;
};

inline void png_error_handler(png_structp png, png_const_charp msg) {
  auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
  if (state != nullptr) std::snprintf(state->message, sizeof state->message, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_handler(png_structp, png_const_charp) {}

struct MemoryReader {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

inline void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + length > reader->bytes.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, reader->bytes.data() + reader->offset, length);
  reader->offset += length;
}

inline void write_to_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

inline void flush_noop(png_structp) {}

// Only trivially destructible locals live in this frame, so longjmp out of
// libpng is safe. `out` belongs to the caller.
inline bool decode_with(png_structp png, png_infop info, DecodedPng& out,
                        std::vector<png_bytep>& rows, std::vector<std::uint8_t>& buffer,
                        PngErrorState& state) {
  if (setjmp(png_jmpbuf(png))) return false;

  png_read_info(png, info);
  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);

  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  } else if (depth != 8 && depth != 16) {
    state.unsupported_depth = true;
    std::snprintf(state.message, sizeof state.message, "unsupported bit depth %d", depth);
    return false;
  }
  if (depth == 16) png_set_swap(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const png_size_t rowbytes = png_get_rowbytes(png, info);

  buffer.assign(rowbytes * height, 0);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  out.channels = channels;
  out.bit_depth = out_depth;
  return true;
}

inline DecodedPng decode(png_rw_ptr reader_fn, void* io, std::FILE* file, const std::string& source) {
  PngErrorState state;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler,
                                           png_warning_handler);
  if (png == nullptr) throw MalformedPng("libpng: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw MalformedPng("libpng: cannot create info struct");
  }
  if (file != nullptr) {
    png_init_io(png, file);
  } else {
    png_set_read_fn(png, io, reader_fn);
  }

  DecodedPng out;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> buffer;
  const bool ok = decode_with(png, info, out, rows, buffer, state);
  png_destroy_read_struct(&png, &info, nullptr);
  if (!ok) {
    if (state.unsupported_depth) throw UnsupportedBitDepth(source + ": " + state.message);
    throw MalformedPng(source + ": " + state.message);
  }

  const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
  out.samples.resize(n);
  if (out.bit_depth == 16) {
    std::memcpy(out.samples.data(), buffer.data(), n * sizeof(std::uint16_t));
  } else {
    for (std::size_t i = 0; i < n; ++i) out.samples[i] = buffer[i];
  }
  return out;
}

inline bool has_png_signature(std::span<const std::uint8_t> head) {
  return head.size() >= 8 && png_sig_cmp(head.data(), 0, 8) == 0;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// `rows` holds 8-bit samples; channels 1 (gray) or 3 (rgb).
inline bool encode_with(png_structp png, png_infop info, int width, int height, int channels,
                        std::vector<png_bytep>& rows) {
  if (setjmp(png_jmpbuf(png))) return false;
  const int color_type = channels == 1 ? PNG_COLOR_TYPE_GRAY
                         : channels == 3 ? PNG_COLOR_TYPE_RGB
                                         : PNG_COLOR_TYPE_RGBA;
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  return true;
}

inline void encode(int width, int height, int channels, std::vector<std::uint8_t>& samples,
                   std::FILE* file, std::vector<std::uint8_t>* memory, const std::string& target) {
  if (width <= 0 || height <= 0) throw InvalidArgument("cannot encode an empty raster as PNG");
  PngErrorState state;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler,
                                            png_warning_handler);
  if (png == nullptr) throw WriteError("libpng: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    throw WriteError("libpng: cannot create info struct");
  }
  if (file != nullptr) {
    png_init_io(png, file);
  } else {
    png_set_write_fn(png, memory, write_to_memory, flush_noop);
  }
  std::vector<png_bytep> rows(height);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) rows[y] = samples.data() + y * stride;
  const bool ok = encode_with(png, info, width, height, channels, rows);
  png_destroy_write_struct(&png, &info);
  if (!ok) throw WriteError(target + ": " + state.message);
}

inline std::uint8_t to_byte(double v) noexcept {
  const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

template <typename T, int C>
std::vector<std::uint8_t> to_bytes(const Raster<T, C>& r) {
  std::vector<std::uint8_t> out(r.data().size());
  const auto src = r.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
      out[i] = src[i] ? 255 : 0;
    } else {
      out[i] = to_byte(static_cast<double>(src[i]));
    }
  }
  return out;
}

}  // namespace detail

/// Decodes PNG bytes held in memory.
[[nodiscard]] inline DecodedPng decode_png(std::span<const std::uint8_t> bytes,
                                           const std::string& source = "<memory>") {
  if (!detail::has_png_signature(bytes)) throw MalformedPng(source + ": not a PNG (bad signature)");
  detail::MemoryReader reader{bytes, 0};
  return detail::decode(detail::read_from_memory, &reader, nullptr, source);
}

[[nodiscard]] inline DecodedPng decode_png_file(const std::filesystem::path& path) {
  const std::string name = path.string();
  detail::FilePtr file(std::fopen(name.c_str(), "rb"));
  if (!file) throw FileNotFound("cannot open '" + name + "'");
  std::uint8_t sig[8] = {};
  const std::size_t got = std::fread(sig, 1, sizeof sig, file.get());
  if (!detail::has_png_signature({sig, got})) {
    throw MalformedPng(name + ": not a PNG (bad signature)");
  }
  std::rewind(file.get());
  return detail::decode(nullptr, nullptr, file.get(), name);
}

/// Converts decoded samples to an RGB image (gray replicated) and a separate
/// alpha plane (all ones when the file carries no alpha).
[[nodiscard]] inline ImageWithAlpha to_image_with_alpha(const DecodedPng& png) {
  ImageWithAlpha out{Image(png.height, png.width), ProbMask(png.height, png.width, 1.0)};
  const double scale = png.max_value();
  const bool gray = png.channels <= 2;
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * png.width + x) * png.channels;
      for (int c = 0; c < 3; ++c) {
        out.rgb(y, x, c) = png.samples[base + (gray ? 0 : c)] / scale;
      }
      if (png.has_alpha()) out.alpha(y, x) = png.samples[base + png.channels - 1] / scale;
    }
  }
  return out;
}

/// Loads a PNG as an Image, or as ImageWithAlpha when the file has an alpha channel.
[[nodiscard]] inline std::variant<Image, ImageWithAlpha> load_png(const std::filesystem::path& path) {
  const DecodedPng png = decode_png_file(path);
  ImageWithAlpha full = to_image_with_alpha(png);
  if (png.has_alpha()) return full;
  return std::move(full.rgb);
}

/// Loads a PNG as RGB, dropping any alpha channel.
[[nodiscard]] inline Image load_image(const std::filesystem::path& path) {
  return to_image_with_alpha(decode_png_file(path)).rgb;
}

/// Loads a PNG as RGB plus alpha (alpha = 1 when absent).
[[nodiscard]] inline ImageWithAlpha load_image_with_alpha(const std::filesystem::path& path) {
  return to_image_with_alpha(decode_png_file(path));
}

/// Luminance (Rec. 601 weights) of a decoded PNG as a ProbMask; gray files map directly.
[[nodiscard]] inline ProbMask to_prob_mask(const DecodedPng& png) {
  ProbMask out(png.height, png.width);
  const double scale = png.max_value();
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * png.width + x) * png.channels;
      if (png.channels <= 2) {
        out(y, x) = png.samples[base] / scale;
      } else {
        const double v = 0.299 * png.samples[base] + 0.587 * png.samples[base + 1] +
                         0.114 * png.samples[base + 2];
        out(y, x) = std::min(1.0, v / scale);
      }
    }
  }
  return out;
}

[[nodiscard]] inline ProbMask load_mask(const std::filesystem::path& path) {
  return to_prob_mask(decode_png_file(path));
}

/// Loads a mask PNG and thresholds it at 0.5 (0 = background, 255 = watermark).
[[nodiscard]] inline BinaryMask load_binary_mask(const std::filesystem::path& path) {
  const ProbMask soft = load_mask(path);
  BinaryMask out(soft.height(), soft.width());
  for (std::size_t i = 0; i < soft.data().size(); ++i) out.data()[i] = soft.data()[i] >= 0.5 ? 1 : 0;
  return out;
}

/// Encodes an Image (RGB8), ProbMask (gray8) or BinaryMask (gray8, 0/255) to PNG bytes.
template <typename T, int C>
[[nodiscard]] std::vector<std::uint8_t> encode_png(const Raster<T, C>& raster) {
  static_assert(C == 1 || C == 3, "PNG encoding supports 1 or 3 channels");
  std::vector<std::uint8_t> samples = detail::to_bytes(raster);
  std::vector<std::uint8_t> out;
  detail::encode(raster.width(), raster.height(), C, samples, nullptr, &out, "<memory>");
  return out;
}

template <typename T, int C>
void save_png(const Raster<T, C>& raster, const std::filesystem::path& path) {
  static_assert(C == 1 || C == 3, "PNG encoding supports 1 or 3 channels");
  const std::string name = path.string();
  std::vector<std::uint8_t> samples = detail::to_bytes(raster);
  detail::FilePtr file(std::fopen(name.c_str(), "wb"));
  if (!file) throw WriteError("cannot open '" + name + "' for writing");
  detail::encode(raster.width(), raster.height(), C, samples, file.get(), nullptr, name);
  if (std::fflush(file.get()) != 0) throw WriteError("failed to flush '" + name + "'");
}

/// Writes RGB plus alpha as an 8-bit RGBA PNG.
inline void save_png(const ImageWithAlpha& image, const std::filesystem::path& path) {
  require_same_shape(image.rgb, image.alpha, "save_png");
  std::vector<std::uint8_t> samples(image.rgb.pixel_count() * 4);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * image.width() + x) * 4;
      for (int c = 0; c < 3; ++c) samples[base + c] = detail::to_byte(image.rgb(y, x, c));
      samples[base + 3] = detail::to_byte(image.alpha(y, x));
    }
  }
  const std::string name = path.string();
  detail::FilePtr file(std::fopen(name.c_str(), "wb"));
  if (!file) throw WriteError("cannot open '" + name + "' for writing");
  detail::encode(image.width(), image.height(), 4, samples, file.get(), nullptr, name);
}

/// Decodes in-memory PNG bytes to RGB.
[[nodiscard]] inline Image decode_image(std::span<const std::uint8_t> bytes) {
  return to_image_with_alpha(decode_png(bytes)).rgb;
}

}  // namespace morphomod::io
