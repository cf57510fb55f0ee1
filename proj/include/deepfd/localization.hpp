#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "deepfd/dataset.hpp"

namespace deepfd {

// Image-sized map of fake evidence, normalized to [0, 1].
struct Heatmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;  // row-major
  std::uint64_t source_id = 0;
  int channel = 0;

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

struct RegionMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> mask;  // 1 where heatmap >= tau
  double tau = 0.0;
  std::vector<Box> components;     // tight bounds, in scan order of first pixel

  bool at(std::size_t x, std::size_t y) const { return mask[y * width + x] != 0; }
  std::size_t count() const;
};

inline constexpr double kDefaultTau = 0.7;

// Min-max normalizes a coarse map (a constant map becomes 0.5 everywhere) and
// upsamples it bilinearly with corners aligned: coarse cell (0,0) lands on
// pixel (0,0) and the last cell on the last pixel.
Heatmap heatmap_from_map(std::span<const double> coarse, std::size_t coarse_w, std::size_t coarse_h,
                         std::size_t out_w = kImageSize, std::size_t out_h = kImageSize);

// Runs the detector and returns the upsampled fake-evidence channel (0) of the
// classifier head's convolution.
Heatmap extract_heatmap(const Image& image, const ModelParams<float>& params, std::uint64_t source_id = 0);

// Binary mask h >= tau plus 4-connected components. Throws ArgumentError
// unless 0 < tau < 1.
RegionMask threshold_regions(const Heatmap& heatmap, double tau);

// Location of the maximum (first in scan order on ties).
std::pair<int, int> heatmap_argmax(const Heatmap& heatmap);

// Intersection over union of the mask pixels and a box.
double mask_box_iou(const RegionMask& mask, const Box& box);

GrayImage heatmap_to_gray(const Heatmap& heatmap);

// Masked pixels blended halfway toward pure red; component rectangles drawn
// as 1-pixel red outlines.
Image render_overlay(const Image& image, const RegionMask& mask);

void export_heatmap(const Heatmap& heatmap, const std::filesystem::path& path);
void export_overlay(const Image& image, const RegionMask& mask, const std::filesystem::path& path);

}  // namespace deepfd
