#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "deepfd/image.hpp"
#include "deepfd/losses.hpp"
#include "deepfd/model.hpp"

namespace deepfd {

// Pixel rectangle, half-open: columns [x0, x1), rows [y0, y1).
struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  int area() const { return width() * height(); }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const Box&, const Box&) = default;
};

std::string format_box(const Box& box);  // "x0,y0,x1,y1"
Box parse_box(const std::string& text);   // throws LoadError

struct ImageSample {
  Image pixels;  // 64 x 64 RGB
  Authenticity y = Authenticity::real;
  std::string source;  // "real" or "fake_<name>"
  std::uint64_t id = 0;
  std::optional<Box> artifact_box;
};

using Dataset = std::vector<ImageSample>;

inline const std::string kRealSource = "real";

enum class ArtifactKind { blocky_upsample, color_banding, patch_checkerboard, blur_halo };

std::string to_string(ArtifactKind kind);
// Throws ConfigError naming the unknown kind.
ArtifactKind parse_artifact_kind(const std::string& name);
std::string source_name(ArtifactKind kind);  // "fake_<kind>"

struct SynthConfig {
  std::size_t n_real = 300;
  std::size_t n_fake_per_source = 100;
  std::vector<ArtifactKind> sources = {ArtifactKind::blocky_upsample, ArtifactKind::color_banding,
                                       ArtifactKind::patch_checkerboard};
  double noise_sigma = 3.0;
  std::uint64_t seed = 0;
};

// One generated image together with the clean texture it was derived from.
struct SynthImage {
  Image base;
  Image image;
  std::optional<Box> artifact_box;
};

// Renders sample `id`; `kind` empty means a real texture. Pure function of its
// arguments, so images can be produced in any order.
SynthImage synth_render(std::optional<ArtifactKind> kind, std::uint64_t seed, std::uint64_t id,
                        double noise_sigma);

// Reals get ids [0, n_real), then each source in order gets the next
// n_fake_per_source ids. Throws ConfigError on an invalid config.
Dataset synth_generate(const SynthConfig& cfg);

// Writes <root>/real/NNNNN.ppm, <root>/fake_<name>/NNNNN.ppm and manifest.tsv.
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);

// Reads the layout written by write_dataset. Class and source come from the
// directory name; files are visited in lexicographic order. When a manifest
// is present its ids and artifact boxes are restored. Throws LoadError.
Dataset load_dataset(const std::filesystem::path& root);

// Distinct sources in first-appearance order (excluding "real").
std::vector<std::string> fake_sources(const Dataset& dataset);

struct PairItem {
  std::uint64_t id_a = 0;
  std::uint64_t id_b = 0;
  PairLabel p;
};

// Exactly n_pairs pairs: ceil(n/2) same-class and floor(n/2) mixed, drawn
// uniformly with replacement, no self-pairs. Throws SamplingError when a class
// has fewer than two samples.
std::vector<PairItem> sample_pairs(const Dataset& dataset, std::size_t n_pairs, std::uint64_t seed);

// Seeded shuffle, then contiguous chunks; the last batch may be short.
template <typename Item>
std::vector<std::vector<Item>> make_batches(std::vector<Item> items, std::size_t batch_size,
                                            std::uint64_t seed) {
  if (batch_size == 0) throw ArgumentError("make_batches: batch size must be positive");
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  std::vector<std::vector<Item>> batches;
  for (std::size_t i = 0; i < items.size(); i += batch_size) {
    const std::size_t end = std::min(items.size(), i + batch_size);
    batches.emplace_back(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(i)),
                         std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return batches;
}

// Normalized N x 3 x 64 x 64 batch of the given samples.
template <typename T>
Tensor<T> batch_tensor(const Dataset& dataset, std::span<const std::size_t> indices);

}  // namespace deepfd
