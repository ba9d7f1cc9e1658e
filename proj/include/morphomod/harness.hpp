#pragma once

// Batch commands behind the `morphomod` CLI. Dataset layout:
//   <root>/watermarked/NNNNN.png
//   <root>/mask/NNNNN.png          (0 = background, 255 = watermark)
//   <root>/labels.csv              (disorient recipe only)
//   <root>/manifest.json

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "morphomod/datagen.hpp"
#include "morphomod/detail/parallel.hpp"
#include "morphomod/errors.hpp"
#include "morphomod/inpaint.hpp"
#include "morphomod/metrics.hpp"
#include "morphomod/morphology.hpp"
#include "morphomod/pipeline.hpp"
#include "morphomod/png_io.hpp"
#include "morphomod/raster.hpp"

namespace morphomod::harness {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kPartialFailure = 2, kFatal = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

[[nodiscard]] inline std::string sample_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05zu.png", index);
  return buf;
}

[[nodiscard]] inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw io::WriteError("cannot create directory '" + dir.string() + "': " + ec.message());
  }
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io::WriteError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw io::WriteError("failed writing '" + path.string() + "'");
}

[[nodiscard]] inline std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw io::FileNotFound("directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// CSV

[[nodiscard]] inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (const char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

[[nodiscard]] inline std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_escape(fields[i]);
  }
  line += '\n';
  return line;
}

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, no embedded newlines.
[[nodiscard]] inline std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw io::FileNotFound("cannot open '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quoted) {
        if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (ch == '"') {
          quoted = false;
        } else {
          cur += ch;
        }
      } else if (ch == '"') {
        quoted = true;
      } else if (ch == ',') {
        fields.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += ch;
      }
    }
    fields.push_back(std::move(cur));
    rows.push_back(std::move(fields));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Dataset manifest

struct SampleEntry {
  std::string watermarked;
  std::string mask;
  std::optional<std::string> label;
};

struct DatasetManifest {
  std::string recipe;
  std::uint64_t seed = 0;
  json params = json::object();
  std::vector<SampleEntry> samples;
};

inline void to_json(json& j, const DatasetManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json e{{"watermarked", s.watermarked}, {"mask", s.mask}};
    if (s.label) e["label"] = *s.label;
    samples.push_back(std::move(e));
  }
  j = json{{"recipe", m.recipe}, {"seed", m.seed}, {"count", m.samples.size()}, {"params", m.params},
           {"samples", std::move(samples)}};
}

inline void from_json(const json& j, DatasetManifest& m) {
  m.recipe = j.value("recipe", std::string{});
  m.seed = j.value("seed", std::uint64_t{0});
  m.params = j.value("params", json::object());
  m.samples.clear();
  for (const auto& e : j.at("samples")) {
    SampleEntry s{e.at("watermarked").get<std::string>(), e.value("mask", std::string{}), std::nullopt};
    if (e.contains("label") && e["label"].is_string()) s.label = e["label"].get<std::string>();
    m.samples.push_back(std::move(s));
  }
}

/// Reads manifest.json when present; otherwise indexes watermarked/*.png and
/// pairs each with mask/<same name> and labels.csv entries.
[[nodiscard]] inline DatasetManifest load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw io::FileNotFound("dataset '" + root.string() + "' does not exist");
  const fs::path manifest_path = root / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    try {
      return json::parse(in).get<DatasetManifest>();
    } catch (const json::exception& e) {
      throw InvalidArgument("malformed manifest '" + manifest_path.string() + "': " + e.what());
    }
  }
  DatasetManifest m;
  std::map<std::string, std::string> labels;
  if (fs::exists(root / "labels.csv")) {
    const auto rows = read_csv(root / "labels.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() >= 3) labels[rows[i][1]] = rows[i][2];
    }
  }
  for (const auto& p : list_pngs(root / "watermarked")) {
    const std::string name = p.filename().string();
    SampleEntry s{"watermarked/" + name, "mask/" + name, std::nullopt};
    if (auto it = labels.find(s.watermarked); it != labels.end()) s.label = it->second;
    m.samples.push_back(std::move(s));
  }
  return m;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string recipe;  // alpha1-s | alpha1-l | clwd | disorient
  int count = 0;
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<fs::path> hosts;
  std::optional<fs::path> logos;
  bool textured = false;
  int size = 256;
  int jobs = 1;
};

namespace detail {

inline Image crop_or_use(const Image& host, int size) {
  if (host.height() < size || host.width() < size) return host;
  Image out(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < 3; ++c) out(y, x, c) = host(y, x, c);
    }
  }
  return out;
}

inline datagen::WatermarkedSample synth_watermarked(const SynthOptions& opt, std::size_t index,
                                                    const std::vector<fs::path>& hosts,
                                                    const std::vector<fs::path>& logos) {
  datagen::Rng rng = datagen::sample_rng(opt.seed, index);
  const Image host = hosts.empty()
                         ? datagen::procedural_host(rng, opt.size, opt.size)
                         : crop_or_use(io::load_image(hosts[datagen::uniform_int(rng, 0, static_cast<int>(hosts.size()) - 1)]),
                                       opt.size);
  // Logos that cannot reach the coverage target are redrawn a bounded number of times.
  constexpr int kAttempts = 8;
  for (int attempt = 0;; ++attempt) {
    const ImageWithAlpha logo =
        logos.empty() ? datagen::procedural_logo(rng)
                      : io::load_image_with_alpha(logos[datagen::uniform_int(rng, 0, static_cast<int>(logos.size()) - 1)]);
    const std::uint64_t sub_seed = rng();
    try {
      if (opt.recipe == "clwd") return datagen::synth_clwd_like(host, logo, sub_seed);
      const auto variant = opt.recipe == "alpha1-s" ? datagen::Alpha1Variant::Small : datagen::Alpha1Variant::Large;
      return datagen::synth_alpha1(host, logo, variant, sub_seed);
    } catch (const Error&) {
      if (attempt + 1 >= kAttempts) throw;
    }
  }
}

}  // namespace detail

[[nodiscard]] inline json recipe_params(const SynthOptions& opt) {
  json p{{"size", opt.size}};
  if (opt.recipe == "alpha1-s" || opt.recipe == "alpha1-l") {
    const auto t = datagen::coverage_target(opt.recipe == "alpha1-s" ? datagen::Alpha1Variant::Small
                                                                     : datagen::Alpha1Variant::Large);
    p["coverage_target"] = t.target;
    p["coverage_tolerance"] = t.tolerance;
    p["opacity"] = 1.0;
  } else if (opt.recipe == "clwd") {
    const datagen::ClwdRanges r;
    p["opacity_range"] = {r.opacity_min, r.opacity_max};
    p["scale_range"] = {r.scale_min, r.scale_max};
    p["rotation_max_deg"] = r.rotation_max_deg;
  } else if (opt.recipe == "disorient") {
    const datagen::DisorientGeometry g;
    p["box"] = g.box;
    p["margin"] = g.margin;
    p["jitter_along"] = g.jitter_along;
    p["jitter_across"] = g.jitter_across;
    json bands = json::object();
    for (const auto d : datagen::kDirections) bands[std::string(datagen::to_string(d))] = g.band(d);
    p["bands"] = bands;
    p["orange"] = {g.orange.r, g.orange.g, g.orange.b};
    p["background"] = opt.textured ? "textured" : "uniform";
    p["size"] = g.size;
  }
  p["hosts"] = opt.hosts ? opt.hosts->string() : "procedural";
  p["logos"] = opt.logos ? opt.logos->string() : "procedural";
  return p;
}

/// Generates `count` samples of the named recipe into the standard layout.
inline DatasetManifest cmd_synth(const SynthOptions& opt) {
  static const std::vector<std::string> kRecipes = {"alpha1-s", "alpha1-l", "clwd", "disorient"};
  if (std::find(kRecipes.begin(), kRecipes.end(), opt.recipe) == kRecipes.end()) {
    throw UsageError("unknown recipe '" + opt.recipe + "' (expected alpha1-s, alpha1-l, clwd, disorient)");
  }
  if (opt.count < 0) throw UsageError("--count must be non-negative");
  std::vector<fs::path> hosts;
  std::vector<fs::path> logos;
  if (opt.hosts) {
    hosts = list_pngs(*opt.hosts);
    if (hosts.empty()) throw io::FileNotFound("no PNG hosts in '" + opt.hosts->string() + "'");
  }
  if (opt.logos) {
    logos = list_pngs(*opt.logos);
    if (logos.empty()) throw io::FileNotFound("no PNG logos in '" + opt.logos->string() + "'");
  }
  ensure_dir(opt.out / "watermarked");
  ensure_dir(opt.out / "mask");

  DatasetManifest manifest;
  manifest.recipe = opt.recipe;
  manifest.seed = opt.seed;
  manifest.params = recipe_params(opt);
  manifest.samples.resize(static_cast<std::size_t>(opt.count));

  std::vector<std::string> errors(manifest.samples.size());
  morphomod::detail::parallel_for(manifest.samples.size(), opt.jobs, [&](std::size_t i) {
    try {
      const std::string name = sample_name(i);
      SampleEntry entry{"watermarked/" + name, "mask/" + name, std::nullopt};
      if (opt.recipe == "disorient") {
        const auto s = datagen::synth_disorient(datagen::sample_rng(opt.seed, i)(), std::nullopt, opt.textured);
        io::save_png(s.image, opt.out / entry.watermarked);
        io::save_png(s.mask, opt.out / entry.mask);
        entry.label = std::string(datagen::to_string(s.label));
      } else {
        const auto s = detail::synth_watermarked(opt, i, hosts, logos);
        io::save_png(s.image, opt.out / entry.watermarked);
        io::save_png(s.mask, opt.out / entry.mask);
      }
      manifest.samples[i] = std::move(entry);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw Error("sample " + std::to_string(i) + ": " + errors[i]);
  }

  if (opt.recipe == "disorient") {
    std::string csv = csv_line({"index", "file", "label"});
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
      csv += csv_line({std::to_string(i), manifest.samples[i].watermarked, *manifest.samples[i].label});
    }
    write_text(opt.out / "labels.csv", csv);
  }
  write_text(opt.out / "manifest.json", json(manifest).dump(2) + "\n");
  return manifest;
}

// ---------------------------------------------------------------------------
// Settings: CLI flags > config file (TOML) > defaults

struct Settings {
  std::optional<int> d;
  std::optional<std::string> kernel;
  std::optional<std::string> backend;
  std::optional<std::string> prompt;
  std::optional<std::string> fill;
  std::optional<std::string> mask_source;
  std::optional<std::string> mask_dir;
  std::optional<double> threshold;
  std::optional<double> tolerance;
  std::optional<int> max_iterations;
  std::optional<int> steps;
  std::optional<int> jobs;
  std::optional<int> source_erode;
  std::optional<std::uint64_t> seed;
  std::optional<bool> dump_stages;
};

/// Fields set in `high` override those in `low`.
[[nodiscard]] inline Settings merge(Settings low, const Settings& high) {
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(low.d, high.d);
  take(low.kernel, high.kernel);
  take(low.backend, high.backend);
  take(low.prompt, high.prompt);
  take(low.fill, high.fill);
  take(low.mask_source, high.mask_source);
  take(low.mask_dir, high.mask_dir);
  take(low.threshold, high.threshold);
  take(low.tolerance, high.tolerance);
  take(low.max_iterations, high.max_iterations);
  take(low.steps, high.steps);
  take(low.jobs, high.jobs);
  take(low.source_erode, high.source_erode);
  take(low.seed, high.seed);
  take(low.dump_stages, high.dump_stages);
  return low;
}

/// Reads flat keys (d, kernel, backend, prompt, fill, mask_source, mask_dir,
/// threshold, tolerance, max_iterations, steps, jobs, source_erode, seed, dump_stages).
[[nodiscard]] inline Settings settings_from_toml(const fs::path& path) {
  toml::table tbl;
  try {
    tbl = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    throw UsageError("config '" + path.string() + "': " + std::string(e.description()));
  }
  Settings s;
  auto get_int = [&](const char* key) -> std::optional<int> {
    if (auto v = tbl[key].value<std::int64_t>()) return static_cast<int>(*v);
    return std::nullopt;
  };
  auto get_str = [&](const char* key) -> std::optional<std::string> { return tbl[key].value<std::string>(); };
  auto get_real = [&](const char* key) -> std::optional<double> { return tbl[key].value<double>(); };
  s.d = get_int("d");
  s.kernel = get_str("kernel");
  s.backend = get_str("backend");
  s.prompt = get_str("prompt");
  s.fill = get_str("fill");
  s.mask_source = get_str("mask_source");
  s.mask_dir = get_str("mask_dir");
  s.threshold = get_real("threshold");
  s.tolerance = get_real("tolerance");
  s.max_iterations = get_int("max_iterations");
  s.steps = get_int("steps");
  s.jobs = get_int("jobs");
  s.source_erode = get_int("source_erode");
  if (auto v = tbl["seed"].value<std::int64_t>()) s.seed = static_cast<std::uint64_t>(*v);
  s.dump_stages = tbl["dump_stages"].value<bool>();
  return s;
}

[[nodiscard]] inline PipelineConfig to_pipeline_config(const Settings& s) {
  PipelineConfig cfg;
  if (s.d) cfg.d = *s.d;
  if (s.kernel) cfg.kernel = parse_kernel_shape(*s.kernel);
  if (s.backend) cfg.backend = *s.backend;
  if (s.prompt) cfg.prompt = *s.prompt;
  if (s.fill) cfg.fill = parse_fill_strategy(*s.fill);
  if (s.threshold) cfg.threshold = *s.threshold;
  if (s.tolerance) cfg.tolerance = *s.tolerance;
  if (s.max_iterations) cfg.max_iterations = *s.max_iterations;
  if (s.steps) cfg.steps = *s.steps;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// remove / eval

struct MaskSourceSpec {
  enum class Kind { File, Chroma, Dir };
  Kind kind = Kind::File;
  source::Chroma chroma{};
  fs::path dir;
};

/// "file" (dataset ground truth), "chroma:<hex>:<tol>", or "dir" (predicted masks in `mask_dir`).
[[nodiscard]] inline MaskSourceSpec parse_mask_source(std::string_view text, const std::optional<fs::path>& mask_dir = {}) {
  MaskSourceSpec spec;
  if (text == "file") return spec;
  if (text == "dir") {
    if (!mask_dir) throw UsageError("--mask-source dir requires --mask-dir");
    spec.kind = MaskSourceSpec::Kind::Dir;
    spec.dir = *mask_dir;
    return spec;
  }
  if (text.starts_with("chroma:")) {
    const std::string_view rest = text.substr(7);
    const auto colon = rest.find(':');
    spec.kind = MaskSourceSpec::Kind::Chroma;
    try {
      spec.chroma.target = parse_hex_color(rest.substr(0, colon));
      if (colon != std::string_view::npos) spec.chroma.tolerance = std::stod(std::string(rest.substr(colon + 1)));
    } catch (const std::exception& e) {
      throw UsageError("bad --mask-source '" + std::string(text) + "': " + e.what());
    }
    return spec;
  }
  throw UsageError("unknown --mask-source '" + std::string(text) + "' (expected file, chroma:<hex>:<tol>, dir)");
}

struct RemoveOptions {
  fs::path dataset;
  fs::path out;
  PipelineConfig cfg;
  MaskSourceSpec source;
  /// Erode the initial mask by this many pixels before dilation (simulates under-prediction).
  int source_erode = 0;
  int jobs = 1;
  bool dump_stages = false;
  bool write_images = true;
};

struct ImageRow {
  std::size_t index = 0;
  std::string file;
  bool ok = false;
  std::string error;
  metrics::MetricsReport metrics;
  double mask_coverage = 0.0;
  std::vector<std::string> flags;
};

struct RemoveSummary {
  std::vector<ImageRow> rows;
  metrics::MetricsReport mean;
  std::size_t failures = 0;
  fs::path csv;

  [[nodiscard]] int exit_code() const noexcept { return failures == 0 ? kSuccess : kPartialFailure; }
};

/// Per-field arithmetic mean over successful rows that have the field.
[[nodiscard]] inline metrics::MetricsReport mean_report(const std::vector<ImageRow>& rows) {
  std::array<double, 10> sum{};
  std::array<std::size_t, 10> n{};
  for (const auto& row : rows) {
    if (!row.ok) continue;
    const auto values = metrics::field_values(row.metrics);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i]) continue;
      sum[i] += *values[i];
      ++n[i];
    }
  }
  std::array<std::optional<double>, 10> mean{};
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (n[i] > 0) mean[i] = sum[i] / static_cast<double>(n[i]);
  }
  metrics::MetricsReport r;
  r.rmse_w = mean[0];
  r.ssim_w = mean[1];
  r.rmse_t = mean[2];
  r.ssim_t = mean[3];
  r.iou = mean[4];
  r.f1 = mean[5];
  r.dice_loss = mean[6];
  r.bce_loss = mean[7];
  r.lpips_w = mean[8];
  r.lpips_t = mean[9];
  return r;
}

[[nodiscard]] inline std::vector<std::string> csv_header() {
  std::vector<std::string> h{"index", "file", "status"};
  for (const char* f : metrics::report_fields()) h.emplace_back(f);
  h.insert(h.end(), {"mask_coverage", "flags", "error"});
  return h;
}

[[nodiscard]] inline std::string metrics_csv(const std::vector<ImageRow>& rows, const metrics::MetricsReport& mean) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
  std::string out = csv_line(csv_header());
  double coverage_sum = 0.0;
  std::size_t ok = 0;
  for (const auto& row : rows) {
    std::vector<std::string> f{std::to_string(row.index), row.file, row.ok ? "ok" : "error"};
    for (const auto& v : metrics::field_values(row.metrics)) f.push_back(opt(v));
    std::string flags;
    for (const auto& fl : row.flags) flags += (flags.empty() ? "" : ";") + fl;
    f.insert(f.end(), {row.ok ? format_double(row.mask_coverage) : std::string{}, flags, row.error});
    out += csv_line(f);
    if (row.ok) {
      coverage_sum += row.mask_coverage;
      ++ok;
    }
  }
  std::vector<std::string> f{"mean", "", "mean"};
  for (const auto& v : metrics::field_values(mean)) f.push_back(opt(v));
  f.insert(f.end(), {ok ? format_double(coverage_sum / ok) : std::string{}, "", ""});
  out += csv_line(f);
  return out;
}

namespace detail {

inline void flag_degenerate(ImageRow& row, const BinaryMask& gt) {
  const std::size_t n = count(gt);
  if (n == 0) row.flags.emplace_back("wr_degenerate");
  if (n == gt.pixel_count()) row.flags.emplace_back("sp_degenerate");
}

}  // namespace detail

/// Runs the pipeline over every dataset sample, writes `<out>/restored/*.png`
/// and `<out>/metrics.csv`. Per-image failures are recorded, not fatal.
inline RemoveSummary cmd_remove(const RemoveOptions& opt, const inpaint::InpaintBackend* backend = nullptr) {
  opt.cfg.validate();
  if (opt.source_erode < 0) throw UsageError("--source-erode must be >= 0");
  const DatasetManifest ds = load_dataset(opt.dataset);
  inpaint::BackendHandle owned;
  if (backend == nullptr) {
    owned = inpaint::select_backend(opt.cfg.backend);
    backend = owned.get();
  }
  ensure_dir(opt.out);
  if (opt.write_images) ensure_dir(opt.out / "restored");
  if (opt.dump_stages) ensure_dir(opt.out / "stages");

  RemoveSummary summary;
  summary.rows.resize(ds.samples.size());
  morphomod::detail::parallel_for(ds.samples.size(), opt.jobs, [&](std::size_t i) {
    ImageRow& row = summary.rows[i];
    const SampleEntry& entry = ds.samples[i];
    row.index = i;
    row.file = entry.watermarked;
    try {
      const Image x = io::load_image(opt.dataset / entry.watermarked);
      const BinaryMask gt = io::load_binary_mask(opt.dataset / entry.mask);
      const std::string stem = fs::path(entry.watermarked).stem().string();

      SegmentSource src;
      switch (opt.source.kind) {
        case MaskSourceSpec::Kind::File:
          src = source::Provided{to_prob(gt)};
          break;
        case MaskSourceSpec::Kind::Chroma:
          src = opt.source.chroma;
          break;
        case MaskSourceSpec::Kind::Dir:
          src = source::FromFile{opt.source.dir / fs::path(entry.watermarked).filename()};
          break;
      }
      if (opt.source_erode > 0) {
        const BinaryMask initial = binarize(resolve_source(x, src), opt.cfg.threshold);
        src = source::Provided{to_prob(erode(initial, make_kernel(opt.source_erode, KernelShape::Square)))};
      }

      const PipelineResult res = morphomod(x, src, opt.cfg, *backend);
      if (opt.write_images) io::save_png(res.restored, opt.out / "restored" / fs::path(entry.watermarked).filename());
      if (opt.dump_stages) dump_stages(res, opt.out / "stages" / stem);

      row.metrics = metrics::report(x, res.restored, gt, res.mask, metrics::DegeneratePolicy::Flag);
      row.mask_coverage = coverage(res.mask);
      detail::flag_degenerate(row, gt);
      for (const auto& w : res.warnings) {
        if (w.starts_with("no watermark detected")) row.flags.emplace_back("empty_source_mask");
        if (w.starts_with("harmonic solver hit")) row.flags.emplace_back("not_converged");
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  });

  for (const auto& row : summary.rows) summary.failures += row.ok ? 0 : 1;
  summary.mean = mean_report(summary.rows);
  summary.csv = opt.out / "metrics.csv";
  write_text(summary.csv, metrics_csv(summary.rows, summary.mean));
  return summary;
}

struct EvalOptions {
  fs::path dataset;
  fs::path outputs;  // directory of restored PNGs named like the dataset samples
  std::optional<fs::path> pred_masks;
  fs::path csv;
  int jobs = 1;
};

/// Metrics only: compares existing outputs against the dataset's watermarked images.
inline RemoveSummary cmd_eval(const EvalOptions& opt) {
  const DatasetManifest ds = load_dataset(opt.dataset);
  RemoveSummary summary;
  summary.rows.resize(ds.samples.size());
  morphomod::detail::parallel_for(ds.samples.size(), opt.jobs, [&](std::size_t i) {
    ImageRow& row = summary.rows[i];
    const SampleEntry& entry = ds.samples[i];
    const fs::path name = fs::path(entry.watermarked).filename();
    row.index = i;
    row.file = entry.watermarked;
    try {
      const Image x = io::load_image(opt.dataset / entry.watermarked);
      const BinaryMask gt = io::load_binary_mask(opt.dataset / entry.mask);
      const Image out = io::load_image(opt.outputs / name);
      std::optional<BinaryMask> pred;
      if (opt.pred_masks) pred = io::load_binary_mask(*opt.pred_masks / name);
      row.metrics = metrics::report(x, out, gt, pred, metrics::DegeneratePolicy::Flag);
      row.mask_coverage = pred ? coverage(*pred) : coverage(gt);
      detail::flag_degenerate(row, gt);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  for (const auto& row : summary.rows) summary.failures += row.ok ? 0 : 1;
  summary.mean = mean_report(summary.rows);
  summary.csv = opt.csv;
  if (opt.csv.has_parent_path()) ensure_dir(opt.csv.parent_path());
  write_text(opt.csv, metrics_csv(summary.rows, summary.mean));
  return summary;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepRow {
  int d = 0;
  metrics::MetricsReport mean;
  double wall_seconds = 0.0;
  std::size_t failures = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ascending d
  std::vector<std::string> violations;
  fs::path csv;

  [[nodiscard]] int exit_code() const noexcept {
    for (const auto& r : rows) {
      if (r.failures) return kPartialFailure;
    }
    return kSuccess;
  }
};

struct SweepOptions {
  RemoveOptions base;
  std::vector<int> ds;
};

/// Trend checks over ascending d: removal and background-change metrics should
/// not decrease (RMSE) or increase (SSIM). Violations are reported, not fatal.
[[nodiscard]] inline std::vector<std::string> check_trend(const std::vector<SweepRow>& rows) {
  std::vector<std::string> out;
  auto check = [&](const char* name, auto get, bool increasing) {
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto a = get(rows[i - 1].mean);
      const auto b = get(rows[i].mean);
      if (!a || !b) continue;
      if (increasing ? (*b < *a) : (*b > *a)) {
        out.push_back(std::string(name) + (increasing ? " decreased" : " increased") + " from d=" +
                      std::to_string(rows[i - 1].d) + " (" + format_double(*a) + ") to d=" +
                      std::to_string(rows[i].d) + " (" + format_double(*b) + ")");
      }
    }
  };
  check("mean rmse_w", [](const metrics::MetricsReport& r) { return r.rmse_w; }, true);
  check("mean rmse_t", [](const metrics::MetricsReport& r) { return r.rmse_t; }, true);
  check("mean ssim_w", [](const metrics::MetricsReport& r) { return r.ssim_w; }, false);
  check("mean ssim_t", [](const metrics::MetricsReport& r) { return r.ssim_t; }, false);
  return out;
}

inline SweepResult cmd_sweep(const SweepOptions& opt, const inpaint::InpaintBackend* backend = nullptr) {
  std::vector<int> ds = opt.ds;
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  if (ds.size() < 2) throw UsageError("sweep needs at least two distinct --d values");
  if (ds.front() < 0) throw UsageError("dilation values must be >= 0");
  inpaint::BackendHandle owned;
  if (backend == nullptr) {
    owned = inpaint::select_backend(opt.base.cfg.backend);
    backend = owned.get();
  }
  ensure_dir(opt.base.out);

  SweepResult result;
  for (const int d : ds) {
    RemoveOptions run = opt.base;
    run.cfg.d = d;
    run.out = opt.base.out / ("d" + std::to_string(d));
    const auto t0 = std::chrono::steady_clock::now();
    const RemoveSummary s = cmd_remove(run, backend);
    const auto t1 = std::chrono::steady_clock::now();
    result.rows.push_back({d, s.mean, std::chrono::duration<double>(t1 - t0).count(), s.failures});
  }
  result.violations = check_trend(result.rows);

  auto opt_str = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string{}; };
  std::string csv = csv_line({"d", "rmse_w", "ssim_w", "rmse_t", "ssim_t", "iou", "f1", "wall_seconds", "failures"});
  for (const auto& r : result.rows) {
    csv += csv_line({std::to_string(r.d), opt_str(r.mean.rmse_w), opt_str(r.mean.ssim_w), opt_str(r.mean.rmse_t),
                     opt_str(r.mean.ssim_t), opt_str(r.mean.iou), opt_str(r.mean.f1), format_double(r.wall_seconds),
                     std::to_string(r.failures)});
  }
  result.csv = opt.base.out / "sweep.csv";
  write_text(result.csv, csv);
  write_text(opt.base.out / "sweep_trend.txt",
             result.violations.empty() ? std::string("trend ok\n") : [&] {
               std::string t;
               for (const auto& v : result.violations) t += "violation: " + v + "\n";
               return t;
             }());
  return result;
}

// ---------------------------------------------------------------------------
// disorient

struct DisorientOptions {
  fs::path dataset;
  fs::path out;
  std::string backend = "harmonic";
  std::uint64_t seed = 0;
  int jobs = 1;
  PipelineConfig cfg = datagen::disorient_config();
};

struct DisorientRow {
  std::size_t index = 0;
  std::string file;
  std::optional<std::string> label;
  std::optional<datagen::Direction> truth;
  std::optional<datagen::Direction> predicted;
  std::optional<datagen::Direction> new_label;
  std::optional<datagen::Direction> disoriented_prediction;
  std::string error;
};

struct DisorientReport {
  std::size_t total = 0;
  std::size_t evaluated = 0;
  std::size_t errors = 0;
  std::size_t original_correct = 0;
  std::size_t disoriented_correct = 0;
  std::vector<DisorientRow> rows;
  std::vector<std::string> warnings;

  [[nodiscard]] double original_accuracy() const noexcept {
    return evaluated ? static_cast<double>(original_correct) / evaluated : 0.0;
  }
  [[nodiscard]] double disoriented_accuracy() const noexcept {
    return evaluated ? static_cast<double>(disoriented_correct) / evaluated : 0.0;
  }
  [[nodiscard]] int exit_code() const noexcept { return errors == 0 ? kSuccess : kPartialFailure; }
};

inline void to_json(json& j, const DisorientReport& r) {
  j = json{{"total", r.total},
           {"evaluated", r.evaluated},
           {"errors", r.errors},
           {"original_accuracy", r.original_accuracy()},
           {"disoriented_accuracy", r.disoriented_accuracy()},
           {"original_correct", r.original_correct},
           {"disoriented_correct", r.disoriented_correct},
           {"warnings", r.warnings}};
}

/// Classifies every sample, disorients it, and re-classifies against the original label.
/// Samples without a readable box count as errors and are excluded from both accuracies.
inline DisorientReport cmd_disorient(const DisorientOptions& opt, const inpaint::InpaintBackend* backend = nullptr) {
  const DatasetManifest ds = load_dataset(opt.dataset);
  inpaint::BackendHandle owned;
  if (backend == nullptr) {
    owned = inpaint::select_backend(opt.backend);
    backend = owned.get();
  }
  ensure_dir(opt.out / "disoriented");

  DisorientReport report;
  report.total = ds.samples.size();
  report.rows.resize(ds.samples.size());
  morphomod::detail::parallel_for(ds.samples.size(), opt.jobs, [&](std::size_t i) {
    DisorientRow& row = report.rows[i];
    const SampleEntry& entry = ds.samples[i];
    row.index = i;
    row.file = entry.watermarked;
    row.label = entry.label;
    try {
      if (!entry.label) throw InvalidArgument("sample has no label");
      row.truth = datagen::parse_direction(*entry.label);
      const Image x = io::load_image(opt.dataset / entry.watermarked);
      const auto result = datagen::disorient(x, *backend, datagen::sample_rng(opt.seed, i)(), opt.cfg);
      row.predicted = result.old_label;
      row.new_label = result.new_label;
      row.disoriented_prediction = datagen::classify_position(result.image);
      io::save_png(result.image, opt.out / "disoriented" / fs::path(entry.watermarked).filename());
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  std::string csv = csv_line({"index", "file", "label", "predicted", "new_label", "disoriented_prediction", "status", "error"});
  auto dir = [](const std::optional<datagen::Direction>& d) { return d ? std::string(datagen::to_string(*d)) : std::string{}; };
  for (const auto& row : report.rows) {
    const bool ok = row.error.empty();
    if (ok) {
      ++report.evaluated;
      report.original_correct += *row.predicted == *row.truth;
      report.disoriented_correct += *row.disoriented_prediction == *row.truth;
    } else {
      ++report.errors;
      report.warnings.push_back(row.file + ": " + row.error + " (excluded from accuracy)");
    }
    csv += csv_line({std::to_string(row.index), row.file, row.label.value_or(""), dir(row.predicted), dir(row.new_label),
                     dir(row.disoriented_prediction), ok ? "ok" : "error", row.error});
  }
  write_text(opt.out / "disorient.csv", csv);
  write_text(opt.out / "disorient_report.json", json(report).dump(2) + "\n");
  return report;
}

}  // namespace morphomod::harness
