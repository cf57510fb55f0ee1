#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "deepfd/dataset.hpp"
#include "deepfd/random.hpp"

namespace deepfd {
namespace {

constexpr std::size_t kSize = kImageSize;

struct Sinusoid {
  double fx, fy, phase;
  double amplitude[3];
};

struct Blob {
  double cx, cy, sigma;
  double amplitude[3];
};

// Smooth procedural texture: per-channel base level, up to five low-frequency
// plane waves and up to three Gaussian blobs. Coordinates are in pixels of the
// 64 x 64 output.
struct Texture {
  double base[3];
  std::vector<Sinusoid> waves;
  std::vector<Blob> blobs;

  double value(double x, double y, std::size_t c) const {
    double v = base[c];
    for (const auto& w : waves)
      v += w.amplitude[c] *
           std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) / kSize + w.phase);
    for (const auto& b : blobs) {
      const double dx = x - b.cx, dy = y - b.cy;
      v += b.amplitude[c] * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    return v;
  }
};

Texture random_texture(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::uniform_int_distribution<int> n_waves(1, 5), n_blobs(0, 3);
  Texture t{};
  for (auto& b : t.base) b = uniform(60.0, 190.0);
  t.waves.resize(static_cast<std::size_t>(n_waves(rng)));
  for (auto& w : t.waves) {
    w.fx = uniform(-3.0, 3.0);
    w.fy = uniform(-3.0, 3.0);
    w.phase = uniform(0.0, 2.0 * std::numbers::pi);
    for (auto& a : w.amplitude) a = uniform(5.0, 30.0);
  }
  t.blobs.resize(static_cast<std::size_t>(n_blobs(rng)));
  for (auto& b : t.blobs) {
    b.cx = uniform(0.0, kSize);
    b.cy = uniform(0.0, kSize);
    b.sigma = uniform(4.0, 14.0);
    for (auto& a : b.amplitude) a = uniform(-60.0, 60.0);
  }
  return t;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Samples the texture on a `cells` x `cells` grid covering the image, adds
// per-sample Gaussian noise and replicates each sample over its block.
Image render(const Texture& t, std::size_t cells, double noise_sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  const std::size_t block = kSize / cells;
  const double center = (static_cast<double>(block) - 1.0) / 2.0;
  Image img(kSize, kSize);
  for (std::size_t cy = 0; cy < cells; ++cy)
    for (std::size_t cx = 0; cx < cells; ++cx)
      for (std::size_t c = 0; c < 3; ++c) {
        const double x = static_cast<double>(cx * block) + center;
        const double y = static_cast<double>(cy * block) + center;
        const double n = noise_sigma > 0.0 ? noise(rng) : 0.0;
        const std::uint8_t v = to_byte(t.value(x, y, c) + n);
        for (std::size_t by = 0; by < block; ++by)
          for (std::size_t bx = 0; bx < block; ++bx) img.at(cx * block + bx, cy * block + by, c) = v;
      }
  return img;
}

std::vector<double> box_filter(const std::vector<double>& src, int radius) {
  const int n = static_cast<int>(kSize);
  std::vector<double> out(src.size());
  const double area = static_cast<double>((2 * radius + 1) * (2 * radius + 1));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            const int sx = std::clamp(x + dx, 0, n - 1), sy = std::clamp(y + dy, 0, n - 1);
            acc += src[static_cast<std::size_t>((sy * n + sx) * 3 + c)];
          }
        out[static_cast<std::size_t>((y * n + x) * 3 + c)] = acc / area;
      }
  return out;
}

Image blur_halo(const Image& base) {
  std::vector<double> v(base.rgb.begin(), base.rgb.end());
  const std::vector<double> blurred = box_filter(v, 2);
  const std::vector<double> local = box_filter(blurred, 1);
  Image out(kSize, kSize);
  for (std::size_t i = 0; i < out.rgb.size(); ++i)
    out.rgb[i] = to_byte(blurred[i] + 1.5 * (blurred[i] - local[i]));
  return out;
}

Image color_banding(const Image& base) {
  Image out = base;
  for (auto& v : out.rgb) v = static_cast<std::uint8_t>((v / 16) * 16 + 8);
  return out;
}

Image patch_checkerboard(const Image& base, std::mt19937_64& rng, Box& box) {
  std::uniform_int_distribution<int> extent(16, 32);
  const int w = extent(rng), h = extent(rng);
  const int size = static_cast<int>(kSize);
  const int x0 = std::uniform_int_distribution<int>(0, size - w)(rng);
  const int y0 = std::uniform_int_distribution<int>(0, size - h)(rng);
  box = Box{x0, y0, x0 + w, y0 + h};
  Image out = base;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) {
      // Cells follow the image grid, as upsampling checkerboards do.
      const int delta = ((x / 2 + y / 2) % 2 == 0) ? 24 : -24;
      for (std::size_t c = 0; c < 3; ++c) {
        auto& px = out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c);
        px = static_cast<std::uint8_t>(std::clamp(px + delta, 0, 255));
      }
    }
  return out;
}

}  // namespace

std::string to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::blocky_upsample: return "blocky_upsample";
    case ArtifactKind::color_banding: return "color_banding";
    case ArtifactKind::patch_checkerboard: return "patch_checkerboard";
    case ArtifactKind::blur_halo: return "blur_halo";
  }
  return "unknown";
}

ArtifactKind parse_artifact_kind(const std::string& name) {
  for (auto kind : {ArtifactKind::blocky_upsample, ArtifactKind::color_banding,
                    ArtifactKind::patch_checkerboard, ArtifactKind::blur_halo})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown artifact source kind '" + name + "'");
}

std::string source_name(ArtifactKind kind) { return "fake_" + to_string(kind); }

SynthImage synth_render(std::optional<ArtifactKind> kind, std::uint64_t seed, std::uint64_t id,
                        double noise_sigma) {
  std::mt19937_64 rng(derive_seed(seed, kStreamSynth, id));
  const Texture texture = random_texture(rng);
  SynthImage out;
  out.base = render(texture, kSize, noise_sigma, rng);
  if (!kind) {
    out.image = out.base;
    return out;
  }
  switch (*kind) {
    case ArtifactKind::blocky_upsample:
      out.image = render(texture, kSize / 4, noise_sigma, rng);
      break;
    case ArtifactKind::color_banding:
      out.image = color_banding(out.base);
      break;
    case ArtifactKind::patch_checkerboard: {
      Box box;
      out.image = patch_checkerboard(out.base, rng, box);
      out.artifact_box = box;
      break;
    }
    case ArtifactKind::blur_halo:
      out.image = blur_halo(out.base);
      break;
  }
  return out;
}

Dataset synth_generate(const SynthConfig& cfg) {
  if (cfg.n_real == 0) throw ConfigError("synth: n_real must be positive");
  if (cfg.n_fake_per_source == 0) throw ConfigError("synth: n_fake_per_source must be positive");
  if (cfg.sources.empty()) throw ConfigError("synth: at least one fake source is required");
  if (!(cfg.noise_sigma >= 0.0)) throw ConfigError("synth: noise_sigma must be non-negative");
  for (std::size_t i = 0; i < cfg.sources.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (cfg.sources[i] == cfg.sources[j])
        throw ConfigError("synth: duplicate source " + to_string(cfg.sources[i]));

  Dataset data;
  data.reserve(cfg.n_real + cfg.n_fake_per_source * cfg.sources.size());
  std::uint64_t id = 0;
  for (std::size_t i = 0; i < cfg.n_real; ++i, ++id) {
    SynthImage img = synth_render(std::nullopt, cfg.seed, id, cfg.noise_sigma);
    data.push_back(ImageSample{std::move(img.image), Authenticity::real, kRealSource, id, std::nullopt});
  }
  for (ArtifactKind kind : cfg.sources)
    for (std::size_t i = 0; i < cfg.n_fake_per_source; ++i, ++id) {
      SynthImage img = synth_render(kind, cfg.seed, id, cfg.noise_sigma);
      data.push_back(ImageSample{std::move(img.image), Authenticity::fake, source_name(kind), id,
                                 img.artifact_box});
    }
  return data;
}

}  // namespace deepfd
