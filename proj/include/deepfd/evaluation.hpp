#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "deepfd/config.hpp"
#include "deepfd/dataset.hpp"

namespace deepfd {

// Confusion counts with "fake" as the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct EvalReport {
  std::string held_out_source = "none";
  std::string variant = "deepfd";  // or "no_contrastive"
  ConfusionCounts counts;
  double precision = 0.0;  // tp / (tp + fp), 0 when undefined
  double recall = 0.0;     // tp / (tp + fn), 0 when undefined
  double accuracy = 0.0;   // (tp + tn) / total, 0 when empty
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t split_hash = 0;
};

inline const std::string kVariantContrastive = "deepfd";
inline const std::string kVariantAblation = "no_contrastive";

EvalReport metrics_from_counts(const ConfusionCounts& counts);
// Throws ArgumentError on a length mismatch.
EvalReport compute_metrics(std::span<const Authenticity> predictions, std::span<const Authenticity> labels);

struct Split {
  Dataset train;
  Dataset test;
};

// Every sample of `held_out_source` plus a seeded round(fraction * n_real)
// reals form the test set; the other fake sources and remaining reals train.
// Throws ArgumentError for a source that is not a fake source of the dataset.
Split split_leave_one_out(const Dataset& dataset, const std::string& held_out_source,
                          double test_fraction_real, std::uint64_t seed);

// Stratified per source: round(fraction * count) of each source is held out.
Split split_random(const Dataset& dataset, double test_fraction, std::uint64_t seed);

// Order-independent hash of the train/test id partition.
std::uint64_t split_hash(const Split& split);

std::vector<Authenticity> predict(const Dataset& dataset, const ModelParams<float>& params,
                                  std::size_t batch_size = 64);
EvalReport evaluate(const Dataset& test, const ModelParams<float>& params);

struct LosoOptions {
  bool ablation = false;
  std::size_t jobs = 1;
  // Progress callback: (held-out source, variant) before each training run.
  std::function<void(const std::string&, const std::string&)> on_cell;
};

// For each held-out source: split, train a fresh model (and the ablation on
// the identical split and seed), evaluate on the held-out test set. Reports
// are ordered by `held_out_sources`, contrastive before ablation.
std::vector<EvalReport> run_loso_benchmark(const Dataset& dataset, const TrainConfig& cfg,
                                           const std::vector<std::string>& held_out_sources,
                                           const LosoOptions& options = {});

// Header `held_out variant tp fp tn fn precision recall accuracy seed`,
// metrics with four decimals, LF line endings.
std::string format_report_tsv(std::span<const EvalReport> reports);
// Throws LoadError on malformed input.
std::vector<EvalReport> parse_report_tsv(const std::string& text);

}  // namespace deepfd
