// deepfd: command-line front end.
//
//   deepfd synth-data --out DIR [--seed N] [--sources a,b,c] [--n-real N] [--n-fake-per-source N]
//   deepfd train      --data DIR --out CKPT [--config FILE] [--no-contrastive] [overrides]
//   deepfd eval       --data DIR [--config FILE] [--hold-out SOURCE|all] [--ablation] [--out TSV]
//   deepfd detect     --ckpt CKPT --image PPM
//   deepfd localize   --ckpt CKPT --image PPM --out PREFIX [--tau T]
//
// Exit codes: 0 success (detect: real), 1 detect verdict fake, 2 usage or
// input errors, 3 I/O failures, 4 training diverged.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "deepfd/checkpoint.hpp"
#include "deepfd/dataset.hpp"
#include "deepfd/evaluation.hpp"
#include "deepfd/localization.hpp"
#include "deepfd/trainer.hpp"

namespace fs = std::filesystem;
using namespace deepfd;

namespace {

constexpr int kExitFake = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

// Training-schedule flags shared by train and eval. Flags override the config
// file, which overrides built-in defaults.
struct ScheduleFlags {
  std::string config_path;
  std::optional<double> lr, margin;
  std::optional<std::size_t> epochs, phase1_epochs, batch_size, pairs_per_epoch;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config file of `key = value` lines");
    cmd->add_option("--lr", lr, "Adam learning rate (default 1e-3)");
    cmd->add_option("--epochs", epochs, "Total epochs (default 15)");
    cmd->add_option("--phase1-epochs", phase1_epochs, "Contrastive-only epochs (default 2)");
    cmd->add_option("--batch-size", batch_size, "Batch size (default 32)");
    cmd->add_option("--margin", margin, "Contrastive margin (default 0.5)");
    cmd->add_option("--pairs-per-epoch", pairs_per_epoch, "Pairs per contrastive epoch (default 10x dataset)");
    cmd->add_option("--seed", seed, "Seed for initialization, pairing and batching");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (lr) cfg.lr = *lr;
    if (margin) cfg.margin = *margin;
    if (epochs) cfg.epochs = *epochs;
    if (phase1_epochs) cfg.phase1_epochs = *phase1_epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    if (pairs_per_epoch) cfg.pairs_per_epoch = *pairs_per_epoch;
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Image load_input_image(const std::string& path) {
  Image img = read_ppm(path);
  if (img.width != kImageSize || img.height != kImageSize)
    throw LoadError(path + ": expected 64x64 image, got " + std::to_string(img.width) + "x" +
                    std::to_string(img.height));
  return img;
}

int cmd_synth(const fs::path& out, std::uint64_t seed, const std::string& sources, std::size_t n_real,
              std::size_t n_fake, double noise) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_real = n_real;
  cfg.n_fake_per_source = n_fake;
  cfg.noise_sigma = noise;
  cfg.sources.clear();
  for (const auto& name : split_list(sources)) cfg.sources.push_back(parse_artifact_kind(name));
  const Dataset data = synth_generate(cfg);
  write_dataset(data, out);
  std::cout << "wrote " << data.size() << " samples to " << out.string() << '\n';
  std::cout << "real\t" << cfg.n_real << '\n';
  for (auto kind : cfg.sources) std::cout << source_name(kind) << '\t' << cfg.n_fake_per_source << '\n';
  return 0;
}

int cmd_train(const fs::path& data_dir, const ScheduleFlags& flags, const fs::path& out, bool no_contrastive,
              std::string losses_path, bool quiet) {
  TrainConfig cfg = flags.resolve();
  if (no_contrastive) cfg = ablation_of(cfg);
  const Dataset data = load_dataset(data_dir);
  TrainHooks hooks;
  if (!quiet)
    hooks.on_iteration = [](int phase, std::size_t it, double loss) {
      if (it % 50 == 0) std::fprintf(stderr, "phase %d iter %zu loss %.5f\n", phase, it, loss);
    };
  const Checkpoint ckpt = train(data, cfg, hooks);
  save_checkpoint(ckpt, out);

  if (losses_path.empty()) losses_path = (out.parent_path() / "losses.tsv").string();
  std::ostringstream tsv;
  tsv << "iter\tphase\tloss\n";
  std::size_t iter = 0;
  char buf[64];
  for (float v : ckpt.phase1_losses) {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    tsv << iter++ << "\t1\t" << buf << '\n';
  }
  for (float v : ckpt.phase2_losses) {
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    tsv << iter++ << "\t2\t" << buf << '\n';
  }
  write_text_atomic(losses_path, tsv.str());
  std::cout << "checkpoint\t" << out.string() << "\nlosses\t" << losses_path << "\niterations\t" << iter << '\n';
  return 0;
}

int cmd_eval(const fs::path& data_dir, const ScheduleFlags& flags, const std::string& hold_out, bool ablation,
             const fs::path& out, std::size_t jobs, std::optional<double> test_fraction, bool quiet) {
  TrainConfig cfg = flags.resolve();
  if (test_fraction) {
    cfg.test_fraction_real = *test_fraction;
    cfg.validate();
  }
  const Dataset data = load_dataset(data_dir);
  const auto available = fake_sources(data);
  std::vector<std::string> held_out;
  if (hold_out == "all") {
    held_out = available;
  } else {
    for (auto name : split_list(hold_out)) {
      if (std::find(available.begin(), available.end(), name) == available.end() &&
          std::find(available.begin(), available.end(), "fake_" + name) != available.end())
        name = "fake_" + name;
      if (std::find(available.begin(), available.end(), name) == available.end())
        throw ArgumentError("unknown source '" + name + "'");
      held_out.push_back(name);
    }
  }
  LosoOptions options;
  options.ablation = ablation;
  options.jobs = jobs;
  if (!quiet)
    options.on_cell = [](const std::string& source, const std::string& variant) {
      std::fprintf(stderr, "training %s held out=%s\n", variant.c_str(), source.c_str());
    };
  const auto reports = run_loso_benchmark(data, cfg, held_out, options);
  const std::string tsv = format_report_tsv(reports);
  write_text_atomic(out, tsv);
  std::cout << tsv;
  return 0;
}

int cmd_detect(const fs::path& ckpt_path, const std::string& image_path) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  audit_shapes(ckpt.params);
  const Image img = load_input_image(image_path);
  const Detection d = detect(normalize_image<float>(img), ckpt.params);
  std::printf("%s\t%s\t%.4f\n", image_path.c_str(), to_string(d.label), d.p_fake);
  return d.label == Authenticity::fake ? kExitFake : 0;
}

int cmd_localize(const fs::path& ckpt_path, const std::string& image_path, double tau, const std::string& prefix) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  audit_shapes(ckpt.params);
  const Image img = load_input_image(image_path);
  const Heatmap heat = extract_heatmap(img, ckpt.params);
  const RegionMask mask = threshold_regions(heat, tau);
  const std::string heat_path = prefix + ".heat.pgm";
  const std::string overlay_path = prefix + ".overlay.ppm";
  export_heatmap(heat, heat_path);
  export_overlay(img, mask, overlay_path);
  std::cout << "components\t" << mask.components.size() << '\n';
  for (const Box& b : mask.components) std::cout << "region\t" << format_box(b) << '\n';
  std::cout << "heatmap\t" << heat_path << "\noverlay\t" << overlay_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepFD fake-image detector: synthetic data, two-phase training, evaluation, localization"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output on stderr");

  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic multi-source dataset");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  std::string synth_sources = "blocky_upsample,color_banding,patch_checkerboard";
  std::size_t n_real = 300, n_fake = 100;
  double noise = 3.0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--sources", synth_sources,
                    "Comma-separated artifact kinds: blocky_upsample, color_banding, patch_checkerboard, blur_halo")
      ->capture_default_str();
  synth->add_option("--n-real", n_real, "Number of real images")->capture_default_str();
  synth->add_option("--n-fake-per-source", n_fake, "Fake images per source")->capture_default_str();
  synth->add_option("--noise-sigma", noise, "Per-pixel noise standard deviation")->capture_default_str();

  auto* train_cmd = app.add_subcommand("train", "Train a detector and write a checkpoint");
  ScheduleFlags train_flags;
  std::string train_data, train_out, losses_path;
  bool no_contrastive = false;
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--losses", losses_path, "Loss series TSV (default: losses.tsv next to the checkpoint)");
  train_cmd->add_flag("--no-contrastive", no_contrastive, "Skip the contrastive phase (ablation)");
  train_flags.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "Leave-one-source-out benchmark");
  ScheduleFlags eval_flags;
  std::string eval_data, hold_out = "all", eval_out = "report.tsv";
  bool ablation = false;
  std::size_t jobs = 1;
  std::optional<double> test_fraction;
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--hold-out", hold_out, "Fake source to hold out, comma list, or 'all'")->capture_default_str();
  eval_cmd->add_flag("--ablation", ablation, "Also train the no-contrastive ablation per split");
  eval_cmd->add_option("--out", eval_out, "Report TSV path")->capture_default_str();
  eval_cmd->add_option("--jobs", jobs, "Parallel leave-one-out cells (results do not depend on it)")
      ->capture_default_str();
  eval_cmd->add_option("--test-fraction-real", test_fraction, "Fraction of reals held out (default 0.2)");
  eval_flags.attach(eval_cmd);

  auto* detect_cmd = app.add_subcommand("detect", "Classify one 64x64 PPM image; exit 0 real, 1 fake");
  std::string detect_ckpt, detect_image;
  detect_cmd->add_option("--ckpt", detect_ckpt, "Checkpoint")->required();
  detect_cmd->add_option("--image", detect_image, "64x64 binary PPM")->required();

  auto* loc_cmd = app.add_subcommand("localize", "Write a fake-evidence heatmap and overlay");
  std::string loc_ckpt, loc_image, loc_prefix;
  double tau = kDefaultTau;
  loc_cmd->add_option("--ckpt", loc_ckpt, "Checkpoint")->required();
  loc_cmd->add_option("--image", loc_image, "64x64 binary PPM")->required();
  loc_cmd->add_option("--out", loc_prefix, "Output prefix for .heat.pgm and .overlay.ppm")->required();
  loc_cmd->add_option("--tau", tau, "Region threshold in (0,1)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(synth_out, synth_seed, synth_sources, n_real, n_fake, noise);
    if (*train_cmd) return cmd_train(train_data, train_flags, train_out, no_contrastive, losses_path, quiet);
    if (*eval_cmd) return cmd_eval(eval_data, eval_flags, hold_out, ablation, eval_out, jobs, test_fraction, quiet);
    if (*detect_cmd) return cmd_detect(detect_ckpt, detect_image);
    if (*loc_cmd) return cmd_localize(loc_ckpt, loc_image, tau, loc_prefix);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
