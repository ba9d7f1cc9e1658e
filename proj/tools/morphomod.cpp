// morphomod: batch CLI for dataset synthesis, watermark removal, metric
// evaluation, dilation sweeps and the box-disorientation experiment.
//
// Exit codes: 0 success, 1 usage error, 2 partial per-image failures, 3 fatal.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "morphomod/harness.hpp"

namespace {

using namespace morphomod;
using namespace morphomod::harness;

// Pipeline flags shared by remove / sweep / disorient. Each is optional so that
// unset flags fall through to the config file and then to the defaults.
struct PipelineFlags {
  std::optional<std::string> config;
  std::optional<std::string> kernel, backend, prompt, fill, mask_source, mask_dir;
  std::optional<double> threshold, tolerance;
  std::optional<int> max_iterations, steps, jobs, source_erode;
  std::optional<std::uint64_t> seed;
  bool dump_stages = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "TOML config file (flags override it)")->check(CLI::ExistingFile);
    app->add_option("--kernel", kernel, "structuring element: square or disk");
    app->add_option("--backend", backend, "harmonic or remote:<url>");
    app->add_option("--prompt", prompt, "inpainting prompt");
    app->add_option("--fill", fill, "pre-fill: none, white, black, gray, avg-bg");
    app->add_option("--mask-source", mask_source, "file, chroma:<hex>:<tol>, or dir");
    app->add_option("--mask-dir", mask_dir, "directory of predicted masks for --mask-source dir");
    app->add_option("--threshold", threshold, "mask binarization threshold");
    app->add_option("--tolerance", tolerance, "harmonic solver tolerance");
    app->add_option("--max-iterations", max_iterations, "harmonic solver iteration cap");
    app->add_option("--steps", steps, "denoising steps for remote backends");
    app->add_option("--jobs", jobs, "worker threads (default: all cores)");
    app->add_option("--source-erode", source_erode, "erode source masks by N pixels before dilation");
    app->add_option("--seed", seed, "random seed");
    app->add_flag("--dump-stages", dump_stages, "write mask/inpainted/restored PNGs per image");
  }

  [[nodiscard]] Settings settings(std::optional<int> d) const {
    Settings cli;
    cli.d = d;
    cli.kernel = kernel;
    cli.backend = backend;
    cli.prompt = prompt;
    cli.fill = fill;
    cli.mask_source = mask_source;
    cli.mask_dir = mask_dir;
    cli.threshold = threshold;
    cli.tolerance = tolerance;
    cli.max_iterations = max_iterations;
    cli.steps = steps;
    cli.jobs = jobs;
    cli.source_erode = source_erode;
    cli.seed = seed;
    if (dump_stages) cli.dump_stages = true;
    Settings file = config ? settings_from_toml(*config) : Settings{};
    return merge(file, cli);
  }
};

RemoveOptions remove_options(const Settings& s, const std::string& dataset, const std::string& out) {
  RemoveOptions opt;
  opt.dataset = dataset;
  opt.out = out;
  opt.cfg = to_pipeline_config(s);
  std::optional<fs::path> mask_dir;
  if (s.mask_dir) mask_dir = *s.mask_dir;
  opt.source = parse_mask_source(s.mask_source.value_or("file"), mask_dir);
  opt.source_erode = s.source_erode.value_or(0);
  opt.jobs = s.jobs.value_or(morphomod::detail::default_jobs());
  opt.dump_stages = s.dump_stages.value_or(false);
  return opt;
}

void print_report_line(const char* label, const metrics::MetricsReport& m) {
  auto f = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("n/a"); };
  std::cout << label << " rmse_w=" << f(m.rmse_w) << " ssim_w=" << f(m.ssim_w) << " rmse_t=" << f(m.rmse_t)
            << " ssim_t=" << f(m.ssim_t) << " iou=" << f(m.iou) << " f1=" << f(m.f1) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morphomod: blind visible-watermark removal toolkit"};
  app.require_subcommand(1);

  // synth
  SynthOptions synth;
  std::string synth_out;
  std::optional<std::string> synth_hosts, synth_logos;
  std::optional<int> synth_jobs;
  auto* cmd_synth_app = app.add_subcommand("synth", "generate a synthetic dataset");
  cmd_synth_app->add_option("--recipe", synth.recipe, "alpha1-s, alpha1-l, clwd, disorient")->required();
  cmd_synth_app->add_option("--count", synth.count, "number of samples")->required();
  cmd_synth_app->add_option("--seed", synth.seed, "random seed");
  cmd_synth_app->add_option("--out", synth_out, "output dataset directory")->required();
  cmd_synth_app->add_option("--hosts", synth_hosts, "folder of host PNGs (default: procedural hosts)");
  cmd_synth_app->add_option("--logos", synth_logos, "folder of logo PNGs with alpha (default: procedural logos)");
  cmd_synth_app->add_option("--size", synth.size, "procedural host size in pixels");
  cmd_synth_app->add_flag("--textured", synth.textured, "textured background for the disorient recipe");
  cmd_synth_app->add_option("--jobs", synth_jobs, "worker threads");

  // remove
  std::string rm_dataset, rm_out;
  std::optional<int> rm_d;
  PipelineFlags rm_flags;
  auto* cmd_remove_app = app.add_subcommand("remove", "remove watermarks from a dataset and score the results");
  cmd_remove_app->add_option("--dataset", rm_dataset, "dataset directory")->required();
  cmd_remove_app->add_option("--out", rm_out, "output directory")->required();
  cmd_remove_app->add_option("--d", rm_d, "dilation parameter");
  rm_flags.attach(cmd_remove_app);

  // sweep
  std::string sw_dataset, sw_out;
  std::vector<int> sw_ds;
  PipelineFlags sw_flags;
  auto* cmd_sweep_app = app.add_subcommand("sweep", "run remove over several dilation values");
  cmd_sweep_app->add_option("--dataset", sw_dataset, "dataset directory")->required();
  cmd_sweep_app->add_option("--out", sw_out, "output directory")->required();
  cmd_sweep_app->add_option("--d", sw_ds, "dilation values, e.g. --d 0 1 3 5 10 or --d 0,1,3")
      ->required()
      ->delimiter(',');
  sw_flags.attach(cmd_sweep_app);

  // disorient
  std::string dis_dataset, dis_out;
  std::optional<int> dis_d;
  PipelineFlags dis_flags;
  auto* cmd_dis_app = app.add_subcommand("disorient", "move every box to another position and score accuracy");
  cmd_dis_app->add_option("--dataset", dis_dataset, "disorient dataset directory")->required();
  cmd_dis_app->add_option("--out", dis_out, "output directory")->required();
  cmd_dis_app->add_option("--d", dis_d, "dilation parameter for box removal (default 1)");
  dis_flags.attach(cmd_dis_app);

  // eval
  std::string ev_dataset, ev_outputs, ev_csv;
  std::optional<std::string> ev_masks;
  std::optional<int> ev_jobs;
  auto* cmd_eval_app = app.add_subcommand("eval", "score existing outputs against a dataset");
  cmd_eval_app->add_option("--dataset", ev_dataset, "dataset directory")->required();
  cmd_eval_app->add_option("--outputs", ev_outputs, "directory of output PNGs named like the dataset")->required();
  cmd_eval_app->add_option("--pred-masks", ev_masks, "directory of predicted masks (adds IoU/F1)");
  cmd_eval_app->add_option("--out", ev_csv, "CSV path")->required();
  cmd_eval_app->add_option("--jobs", ev_jobs, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*cmd_synth_app) {
      synth.out = synth_out;
      if (synth_hosts) synth.hosts = *synth_hosts;
      if (synth_logos) synth.logos = *synth_logos;
      synth.jobs = synth_jobs.value_or(morphomod::detail::default_jobs());
      const auto manifest = cmd_synth(synth);
      std::cout << "wrote " << manifest.samples.size() << " samples to " << synth.out.string() << "\n";
      return kSuccess;
    }
    if (*cmd_remove_app) {
      const Settings s = rm_flags.settings(rm_d);
      const auto summary = cmd_remove(remove_options(s, rm_dataset, rm_out));
      print_report_line("mean", summary.mean);
      std::cout << "metrics: " << summary.csv.string() << " (" << summary.failures << " failures)\n";
      return summary.exit_code();
    }
    if (*cmd_sweep_app) {
      const Settings s = sw_flags.settings(std::nullopt);
      SweepOptions opt{remove_options(s, sw_dataset, sw_out), sw_ds};
      const auto result = cmd_sweep(opt);
      for (const auto& row : result.rows) {
        print_report_line(("d=" + std::to_string(row.d)).c_str(), row.mean);
      }
      for (const auto& v : result.violations) std::cout << "trend violation: " << v << "\n";
      if (result.violations.empty()) std::cout << "trend ok\n";
      std::cout << "sweep: " << result.csv.string() << "\n";
      return result.exit_code();
    }
    if (*cmd_dis_app) {
      Settings defaults;
      defaults.d = 1;
      const Settings s = merge(defaults, dis_flags.settings(dis_d));
      DisorientOptions opt;
      opt.dataset = dis_dataset;
      opt.out = dis_out;
      opt.cfg = to_pipeline_config(s);
      opt.backend = opt.cfg.backend;
      opt.seed = s.seed.value_or(0);
      opt.jobs = s.jobs.value_or(morphomod::detail::default_jobs());
      const auto report = cmd_disorient(opt);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "original accuracy: " << report.original_accuracy() * 100.0 << "%\n"
                << "disoriented accuracy: " << report.disoriented_accuracy() * 100.0 << "%\n"
                << "evaluated " << report.evaluated << " of " << report.total << " (" << report.errors
                << " errors)\n";
      return report.exit_code();
    }
    if (*cmd_eval_app) {
      EvalOptions opt;
      opt.dataset = ev_dataset;
      opt.outputs = ev_outputs;
      if (ev_masks) opt.pred_masks = *ev_masks;
      opt.csv = ev_csv;
      opt.jobs = ev_jobs.value_or(morphomod::detail::default_jobs());
      const auto summary = cmd_eval(opt);
      print_report_line("mean", summary.mean);
      return summary.exit_code();
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return kFatal;
  }
  return kUsageError;
}
