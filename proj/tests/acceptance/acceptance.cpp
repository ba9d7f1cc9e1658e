// Acceptance suite: one PASS/FAIL line per criterion; exits 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "morphomod/morphomod.hpp"
#include "support/oracles.hpp"
#include "support/stub_server.hpp"
#include "support/tempdir.hpp"

using namespace morphomod;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome dilation_oracle() {
  oracle::Rng rng(1001);
  std::size_t mismatches = 0;
  const auto t0 = Clock::now();
  for (int t = 0; t < 1000; ++t) {
    const BinaryMask m = oracle::random_mask(rng, 16, 16, std::uniform_real_distribution<double>(0.01, 0.5)(rng));
    const int d = static_cast<int>(rng() % 5);
    mismatches += dilate(m, make_kernel(d, KernelShape::Square)) != oracle::dilate(m, d, false);
    mismatches += dilate(m, make_kernel(d, KernelShape::Disk)) != oracle::dilate(m, d, true);
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 5.0,
          std::to_string(mismatches) + " mismatches over 2000 comparisons, " + fmt("%.2f s", secs) + " (limit 5 s)"};
}

Outcome morphology_laws() {
  oracle::Rng rng(1002);
  const int cases = 600;
  int extensive = 0, mono_mask = 0, mono_d = 0, identity = 0, duality = 0;
  for (int t = 0; t < cases; ++t) {
    const int h = 1 + static_cast<int>(rng() % 16), w = 1 + static_cast<int>(rng() % 16);
    const BinaryMask m = oracle::random_mask(rng, h, w, std::uniform_real_distribution<double>(0.02, 0.6)(rng));
    BinaryMask bigger = m;
    for (auto& v : bigger.data()) v = (rng() % 4 == 0) ? 1 : v;
    const int d = static_cast<int>(rng() % 5);
    const int d2 = d + static_cast<int>(rng() % 4);
    const KernelShape shape = (rng() & 1) ? KernelShape::Disk : KernelShape::Square;
    const auto k = make_kernel(d, shape);
    const BinaryMask dm = dilate(m, k);
    extensive += !is_subset(m, dm);
    mono_mask += !is_subset(dm, dilate(bigger, k));
    mono_d += !is_subset(dm, dilate(m, make_kernel(d2, shape)));
    identity += dilate(m, make_kernel(0, shape)) != m;
    duality += dm != invert(erode(invert(m), reflect(k), Border::One));
  }
  const int total = extensive + mono_mask + mono_d + identity + duality;
  return {total == 0, std::to_string(cases) + " cases per law; violations: extensive " + std::to_string(extensive) +
                          ", monotone-mask " + std::to_string(mono_mask) + ", monotone-d " + std::to_string(mono_d) +
                          ", d=0 identity " + std::to_string(identity) + ", duality " + std::to_string(duality)};
}

Outcome restore_correctness() {
  oracle::Rng rng(1003);
  int bad = 0;
  for (int t = 0; t < 500; ++t) {
    const int h = 1 + static_cast<int>(rng() % 24), w = 1 + static_cast<int>(rng() % 24);
    const Image x = oracle::random_image(rng, h, w), x_hat = oracle::random_image(rng, h, w);
    const BinaryMask m = oracle::random_mask(rng, h, w, 0.5);
    const Image out = restore(x, m, x_hat);
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx)
        for (int c = 0; c < 3; ++c) bad += out(y, xx, c) != (m(y, xx) ? x_hat(y, xx, c) : x(y, xx, c));
  }
  int identity_bad = 0;
  for (int t = 0; t < 50; ++t) {
    const Image x = oracle::random_image(rng, 20, 20);
    PipelineConfig cfg;
    cfg.d = static_cast<int>(rng() % 11);
    identity_bad += morphomod::morphomod(x, source::Provided{ProbMask(20, 20)}, cfg).restored != x;
  }
  return {bad == 0 && identity_bad == 0, "500 random triples: " + std::to_string(bad) +
                                             " mismatched samples; 50 zero-mask pipeline runs: " +
                                             std::to_string(identity_bad) + " not bit-identical"};
}

inpaint::InpaintRequest harmonic_request(const Image& img, const BinaryMask& m, FillStrategy fill, double tol) {
  inpaint::InpaintRequest r{img, m, "", {}};
  r.options.fill = fill;
  r.options.tolerance = tol;
  return r;
}

Outcome harmonic_inpainter() {
  oracle::Rng rng(1004);
  const double tol = 1e-5;

  // Maximum principle per 4-connected hole against its rim of Dirichlet pixels.
  int max_violations = 0;
  for (int t = 0; t < 200; ++t) {
    const int h = 6 + static_cast<int>(rng() % 20), w = 6 + static_cast<int>(rng() % 20);
    const Image img = oracle::random_image(rng, h, w);
    BinaryMask m = (t % 2) ? oracle::random_blobs(rng, h, w, 3) : oracle::random_mask(rng, h, w, 0.5);
    m(0, 0) = 0;
    const Image out = inpaint::inpaint_harmonic(harmonic_request(img, m, FillStrategy::AverageBackground, tol)).image;
    std::vector<int> comp(static_cast<std::size_t>(h) * w, -1);
    int ncomp = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!m(y, x) || comp[y * w + x] >= 0) continue;
        std::vector<std::pair<int, int>> stack{{y, x}}, cells;
        comp[y * w + x] = ncomp;
        double lo[3] = {1e9, 1e9, 1e9}, hi[3] = {-1e9, -1e9, -1e9};
        while (!stack.empty()) {
          auto [cy, cx] = stack.back();
          stack.pop_back();
          cells.push_back({cy, cx});
          const int dy[] = {-1, 1, 0, 0}, dx[] = {0, 0, -1, 1};
          for (int k = 0; k < 4; ++k) {
            const int ny = cy + dy[k], nx = cx + dx[k];
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            if (!m(ny, nx)) {
              for (int c = 0; c < 3; ++c) {
                lo[c] = std::min(lo[c], img(ny, nx, c));
                hi[c] = std::max(hi[c], img(ny, nx, c));
              }
            } else if (comp[ny * w + nx] < 0) {
              comp[ny * w + nx] = ncomp;
              stack.push_back({ny, nx});
            }
          }
        }
        for (auto [cy, cx] : cells)
          for (int c = 0; c < 3; ++c)
            max_violations += out(cy, cx, c) < lo[c] - tol || out(cy, cx, c) > hi[c] + tol;
        ++ncomp;
      }
  }

  // 1-D hole against the exact tridiagonal solution.
  double ramp_err = 0;
  for (int n = 3; n <= 64; n += 7) {
    Image img(1, n, 0.5);
    BinaryMask m(1, n, 1);
    m(0, 0) = m(0, n - 1) = 0;
    for (int c = 0; c < 3; ++c) {
      img(0, 0, c) = 0.0;
      img(0, n - 1, c) = 1.0;
    }
    const std::size_t k = n - 2;
    std::vector<double> rhs(k, 0.0);
    rhs.back() = 1.0;
    const auto exact = oracle::solve_tridiagonal(std::vector<double>(k, -1), std::vector<double>(k, 2),
                                                 std::vector<double>(k, -1), rhs);
    const Image out = inpaint::inpaint_harmonic(harmonic_request(img, m, FillStrategy::AverageBackground, tol)).image;
    for (std::size_t i = 0; i < k; ++i) ramp_err = std::max(ramp_err, std::abs(out(0, static_cast<int>(i + 1), 0) - exact[i]));
  }

  // Constant images.
  double const_err = 0;
  for (int t = 0; t < 50; ++t) {
    const int h = 5 + static_cast<int>(rng() % 30), w = 5 + static_cast<int>(rng() % 30);
    const double v = std::uniform_real_distribution<double>(0, 1)(rng);
    BinaryMask m = oracle::random_blobs(rng, h, w, 4);
    m(h - 1, w - 1) = 0;
    const Image out = inpaint::inpaint_harmonic(harmonic_request(Image(h, w, v), m, FillStrategy::Black, tol)).image;
    for (double x : out.data()) const_err = std::max(const_err, std::abs(x - v));
  }

  // Initialization independence.
  double fill_spread = 0;
  for (int t = 0; t < 30; ++t) {
    const int h = 16 + static_cast<int>(rng() % 32), w = 16 + static_cast<int>(rng() % 32);
    const Image img = oracle::smooth_image(rng, h, w);
    BinaryMask m = oracle::random_blobs(rng, h, w, 3);
    m(0, 0) = 0;
    std::vector<Image> outs;
    for (const auto fill : {FillStrategy::None, FillStrategy::White, FillStrategy::Black, FillStrategy::Gray,
                            FillStrategy::AverageBackground})
      outs.push_back(inpaint::inpaint_harmonic(harmonic_request(img, m, fill, tol)).image);
    for (std::size_t a = 1; a < outs.size(); ++a)
      for (std::size_t i = 0; i < img.data().size(); ++i)
        fill_spread = std::max(fill_spread, std::abs(outs[a].data()[i] - outs[0].data()[i]));
  }

  const bool pass = max_violations == 0 && ramp_err <= 1e-4 && const_err <= 1e-6 && fill_spread <= 10 * tol;
  return {pass, "max-principle violations " + std::to_string(max_violations) + "/200 instances; 1-D error " +
                    fmt("%.2e", ramp_err) + " (<= 1e-4); constant error " + fmt("%.2e", const_err) +
                    " (<= 1e-6); fill spread " + fmt("%.2e", fill_spread) + " (<= 1e-4)"};
}

Outcome metric_identities() {
  oracle::Rng rng(1005);
  int bad = 0;
  double rmse_dev = 0, f1_dev = 0, bce_dev = 0;
  for (int t = 0; t < 200; ++t) {
    const Image a = oracle::random_image(rng, 16, 16), b = oracle::random_image(rng, 16, 16);
    BinaryMask r = oracle::random_mask(rng, 16, 16, 0.4);
    r(3, 3) = 1;
    bad += metrics::rmse_region(a, a, r) != 0.0;
    bad += metrics::ssim_region(a, a, r) != 1.0;
    const BinaryMask p = oracle::random_mask(rng, 16, 16, 0.3), g = oracle::random_mask(rng, 16, 16, 0.3);
    const double i = metrics::iou(p, g);
    f1_dev = std::max(f1_dev, std::abs(metrics::f1(p, g) - 2 * i / (1 + i)));
    bce_dev = std::max(bce_dev, std::abs(metrics::dice_bce(ProbMask(16, 16, 0.5), g).bce_loss - std::log(2.0)));
    const Image c = oracle::random_image(rng, 8, 8), d = oracle::random_image(rng, 8, 8);
    BinaryMask rr = oracle::random_mask(rng, 8, 8, 0.5);
    rr(0, 0) = 1;
    rmse_dev = std::max(rmse_dev, std::abs(metrics::rmse_region(c, d, rr) - oracle::rmse(c, d, rr)));
  }
  const bool pass = bad == 0 && f1_dev < 1e-12 && bce_dev <= 1e-9 && rmse_dev <= 1e-12;
  return {pass, "self-identity failures " + std::to_string(bad) + "/400; |F1 - 2IoU/(1+IoU)| max " +
                    fmt("%.1e", f1_dev) + "; |BCE(0.5) - ln 2| max " + fmt("%.1e", bce_dev) +
                    " (<= 1e-9); 8x8 RMSE vs oracle max " + fmt("%.1e", rmse_dev) + " (<= 1e-12)"};
}

Outcome trend_shape() {
  testutil::TempDir dir("acceptance_trend");
  const auto t0 = Clock::now();
  harness::SynthOptions synth;
  synth.recipe = "alpha1-s";
  synth.count = 50;
  synth.seed = 1;
  synth.out = dir / "corpus";
  synth.jobs = 1;
  (void)harness::cmd_synth(synth);

  harness::SweepOptions sweep;
  sweep.base.dataset = synth.out;
  sweep.base.out = dir / "sweep";
  sweep.base.source_erode = 1;
  sweep.base.jobs = 1;
  sweep.base.write_images = false;
  sweep.ds = {0, 1, 3, 5, 10};
  const harness::SweepResult res = harness::cmd_sweep(sweep);
  const double secs = seconds_since(t0);

  bool monotone = true;
  std::string series_w = "RMSE_W", series_t = "RMSE_T";
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    const auto& r = res.rows[i];
    series_w += " d" + std::to_string(r.d) + "=" + fmt("%.5f", r.mean.rmse_w.value_or(NAN));
    series_t += " d" + std::to_string(r.d) + "=" + fmt("%.5f", r.mean.rmse_t.value_or(NAN));
    if (i > 0) {
      const auto& p = res.rows[i - 1];
      monotone &= *r.mean.rmse_w >= *p.mean.rmse_w && *r.mean.rmse_t >= *p.mean.rmse_t;
    }
  }
  const bool gap = *res.rows[2].mean.rmse_w > *res.rows[0].mean.rmse_w;
  std::size_t failures = 0;
  for (const auto& r : res.rows) failures += r.failures;
  const bool pass = monotone && gap && secs < 120.0 && failures == 0;
  return {pass, series_w + "; " + series_t + "; non-decreasing " + (monotone ? "yes" : "no") +
                    "; RMSE_W(3) > RMSE_W(0) " + (gap ? "yes" : "no") + "; " + fmt("%.1f s", secs) +
                    " (limit 120 s)"};
}

Outcome dataset_recipes() {
  double s_lo = 1, s_hi = 0, l_lo = 1, l_hi = 0, op_lo = 1, op_hi = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (const char* recipe : {"alpha1-s", "alpha1-l", "clwd"}) {
      harness::SynthOptions opt;
      opt.recipe = recipe;
      opt.seed = seed;
      const auto s = harness::detail::synth_watermarked(opt, 0, {}, {});
      const double cov = coverage(s.mask);
      if (opt.recipe == "alpha1-s") {
        s_lo = std::min(s_lo, cov);
        s_hi = std::max(s_hi, cov);
      } else if (opt.recipe == "alpha1-l") {
        l_lo = std::min(l_lo, cov);
        l_hi = std::max(l_hi, cov);
      } else {
        op_lo = std::min(op_lo, s.spec.opacity);
        op_hi = std::max(op_hi, s.spec.opacity);
      }
    }
  }
  const bool pass = s_lo >= 0.05 && s_hi <= 0.07 && l_lo >= 0.33 && l_hi <= 0.37 && op_lo >= 0.3 && op_hi <= 0.7;
  return {pass, "Alpha1-S coverage [" + fmt("%.4f", s_lo) + ", " + fmt("%.4f", s_hi) + "] in [0.05, 0.07]; " +
                    "Alpha1-L [" + fmt("%.4f", l_lo) + ", " + fmt("%.4f", l_hi) + "] in [0.33, 0.37]; " +
                    "CLWD opacity [" + fmt("%.4f", op_lo) + ", " + fmt("%.4f", op_hi) + "] in [0.3, 0.7]"};
}

Outcome disorient_table() {
  testutil::TempDir dir("acceptance_disorient");
  const auto t0 = Clock::now();
  harness::SynthOptions synth;
  synth.recipe = "disorient";
  synth.count = 200;
  synth.seed = 1;
  synth.out = dir / "corpus";
  synth.jobs = 1;
  (void)harness::cmd_synth(synth);
  harness::DisorientOptions opt;
  opt.dataset = synth.out;
  opt.out = dir / "out";
  opt.seed = 1;
  opt.jobs = 1;
  const auto report = harness::cmd_disorient(opt);
  const double secs = seconds_since(t0);
  const bool pass = report.evaluated == 200 && report.original_correct == 200 && report.disoriented_correct == 0 &&
                    secs < 60.0;
  return {pass, "original accuracy " + fmt("%.1f%%", 100 * report.original_accuracy()) + ", disoriented " +
                    fmt("%.1f%%", 100 * report.disoriented_accuracy()) + " over " + std::to_string(report.evaluated) +
                    "/200 evaluated; " + fmt("%.1f s", secs) + " (limit 60 s)"};
}

Outcome remote_contract() {
  oracle::Rng rng(1009);
  Image img(32, 40);
  for (auto& v : img.data()) v = static_cast<double>(rng() % 256) / 255.0;
  const BinaryMask m = oracle::random_blobs(rng, 32, 40, 2);
  std::string detail;
  bool pass = true;
  {
    stub::Server server(stub::Mode::Echo);
    const auto backend = inpaint::select_backend("remote:" + server.endpoint());
    PipelineConfig cfg;
    cfg.fill = FillStrategy::None;
    const bool identity = morphomod::morphomod(img, source::Provided{to_prob(m)}, cfg, *backend).restored == img;
    pass &= identity;
    detail += std::string("echo restore-identity ") + (identity ? "yes" : "no");
  }
  const std::pair<stub::Mode, inpaint::RemoteError::Kind> cases[] = {
      {stub::Mode::NotJson, inpaint::RemoteError::Kind::InvalidPayload},
      {stub::Mode::NoImage, inpaint::RemoteError::Kind::InvalidPayload},
      {stub::Mode::BadBase64, inpaint::RemoteError::Kind::InvalidPayload},
      {stub::Mode::NotPng, inpaint::RemoteError::Kind::InvalidPayload},
      {stub::Mode::WrongSize, inpaint::RemoteError::Kind::DimensionMismatch},
      {stub::Mode::ServerError, inpaint::RemoteError::Kind::HttpStatus},
  };
  int right = 0;
  for (const auto& [mode, kind] : cases) {
    stub::Server server(mode);
    inpaint::InpaintRequest req{img, m, "Remove.", {}};
    try {
      (void)inpaint::inpaint_remote(req, server.endpoint());
    } catch (const inpaint::RemoteError& e) {
      right += e.kind() == kind;
    }
  }
  int port = 0;
  {
    stub::Server server(stub::Mode::Echo);
    port = std::stoi(server.endpoint().substr(server.endpoint().rfind(':') + 1));
  }
  try {
    inpaint::InpaintRequest req{img, m, "Remove.", {}};
    req.options.timeout_seconds = 2;
    (void)inpaint::inpaint_remote(req, "http://127.0.0.1:" + std::to_string(port));
  } catch (const inpaint::RemoteError& e) {
    right += e.kind() == inpaint::RemoteError::Kind::Network;
  }
  pass &= right == 7;
  detail += "; error kinds correct " + std::to_string(right) + "/7";
  return {pass, detail};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"dilation matches brute-force oracle", dilation_oracle},
      {"morphology laws", morphology_laws},
      {"restore correctness", restore_correctness},
      {"harmonic inpainter properties", harmonic_inpainter},
      {"metric identities", metric_identities},
      {"dilation trade-off trend", trend_shape},
      {"dataset recipe ranges", dataset_recipes},
      {"disorient accuracy 100% / 0%", disorient_table},
      {"remote protocol contract", remote_contract},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
