#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace deepfd {

// Training schedule. Text form is line-oriented `key = value` with `#`
// comments; unknown keys are rejected.
struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 15;
  std::size_t phase1_epochs = 2;
  std::size_t batch_size = 32;
  double margin = 0.5;
  // Pairs drawn per contrastive epoch; unset means 10x the training-set size.
  std::optional<std::size_t> pairs_per_epoch;
  std::uint64_t seed = 0;
  bool use_contrastive = true;
  // Fraction of real images moved to a held-out test set during evaluation.
  double test_fraction_real = 0.2;

  // Throws ConfigError on an inconsistent schedule.
  void validate() const;

  std::size_t contrastive_epochs() const { return use_contrastive ? phase1_epochs : 0; }
  std::size_t classifier_epochs() const { return epochs - contrastive_epochs(); }
  std::size_t pairs_for(std::size_t dataset_size) const {
    return pairs_per_epoch.value_or(10 * dataset_size);
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Same seed and classifier schedule, contrastive phase removed.
TrainConfig ablation_of(TrainConfig cfg);

// Applies `key = value` lines on top of `base`. Throws ConfigError with the
// line number on syntax errors, unknown keys and bad values.
TrainConfig parse_config(const std::string& text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
// Sets a single key; shared by the file parser and command-line overrides.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string format_config(const TrainConfig& cfg);

// FNV-1a over format_config().
std::uint64_t config_hash(const TrainConfig& cfg);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash = 0xcbf29ce484222325ULL);

}  // namespace deepfd
