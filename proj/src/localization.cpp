#include "deepfd/localization.hpp"

#include <algorithm>
#include <cmath>

namespace deepfd {

std::size_t RegionMask::count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

Heatmap heatmap_from_map(std::span<const double> coarse, std::size_t coarse_w, std::size_t coarse_h,
                         std::size_t out_w, std::size_t out_h) {
  if (coarse_w == 0 || coarse_h == 0 || coarse.size() != coarse_w * coarse_h)
    throw ShapeError("heatmap: coarse map size mismatch");
  if (out_w < 2 || out_h < 2) throw ShapeError("heatmap: output must be at least 2x2");

  const auto [lo_it, hi_it] = std::minmax_element(coarse.begin(), coarse.end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  std::vector<double> norm(coarse.size());
  for (std::size_t i = 0; i < coarse.size(); ++i) norm[i] = span > 0.0 ? (coarse[i] - lo) / span : 0.5;

  Heatmap h;
  h.width = out_w;
  h.height = out_h;
  h.values.resize(out_w * out_h);
  const double sx = coarse_w > 1 ? static_cast<double>(coarse_w - 1) / static_cast<double>(out_w - 1) : 0.0;
  const double sy = coarse_h > 1 ? static_cast<double>(coarse_h - 1) / static_cast<double>(out_h - 1) : 0.0;
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = static_cast<double>(y) * sy;
    const std::size_t y0 = std::min(static_cast<std::size_t>(fy), coarse_h - 1);
    const std::size_t y1 = std::min(y0 + 1, coarse_h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = static_cast<double>(x) * sx;
      const std::size_t x0 = std::min(static_cast<std::size_t>(fx), coarse_w - 1);
      const std::size_t x1 = std::min(x0 + 1, coarse_w - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = norm[y0 * coarse_w + x0] * (1.0 - wx) + norm[y0 * coarse_w + x1] * wx;
      const double bottom = norm[y1 * coarse_w + x0] * (1.0 - wx) + norm[y1 * coarse_w + x1] * wx;
      h.values[y * out_w + x] = std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0);
    }
  }
  return h;
}

Heatmap extract_heatmap(const Image& image, const ModelParams<float>& params, std::uint64_t source_id) {
  const ForwardOutputs<float> out = forward(normalize_image<float>(image), params);
  const std::size_t cells = kMapSize * kMapSize;
  std::vector<double> fake_channel(out.loc_map.data().begin(),
                                   out.loc_map.data().begin() + static_cast<std::ptrdiff_t>(cells));
  Heatmap h = heatmap_from_map(fake_channel, kMapSize, kMapSize, image.width, image.height);
  h.source_id = source_id;
  h.channel = 0;
  return h;
}

RegionMask threshold_regions(const Heatmap& heatmap, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("threshold_regions: tau must be in (0, 1)");
  RegionMask m;
  m.width = heatmap.width;
  m.height = heatmap.height;
  m.tau = tau;
  m.mask.resize(heatmap.values.size());
  for (std::size_t i = 0; i < m.mask.size(); ++i) m.mask[i] = heatmap.values[i] >= tau ? 1 : 0;

  std::vector<bool> seen(m.mask.size(), false);
  std::vector<std::size_t> stack;
  const int w = static_cast<int>(m.width), h = static_cast<int>(m.height);
  for (std::size_t start = 0; start < m.mask.size(); ++start) {
    if (!m.mask[start] || seen[start]) continue;
    Box box{w, h, -1, -1};
    stack.push_back(start);
    seen[start] = true;
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(p % m.width), y = static_cast<int>(p / m.width);
      box.x0 = std::min(box.x0, x);
      box.y0 = std::min(box.y0, y);
      box.x1 = std::max(box.x1, x + 1);
      box.y1 = std::max(box.y1, y + 1);
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || ny[k] < 0 || nx[k] >= w || ny[k] >= h) continue;
        const auto q = static_cast<std::size_t>(ny[k] * w + nx[k]);
        if (m.mask[q] && !seen[q]) {
          seen[q] = true;
          stack.push_back(q);
        }
      }
    }
    m.components.push_back(box);
  }
  return m;
}

std::pair<int, int> heatmap_argmax(const Heatmap& heatmap) {
  const auto it = std::max_element(heatmap.values.begin(), heatmap.values.end());
  const auto i = static_cast<std::size_t>(it - heatmap.values.begin());
  return {static_cast<int>(i % heatmap.width), static_cast<int>(i / heatmap.width)};
}

double mask_box_iou(const RegionMask& mask, const Box& box) {
  std::size_t inter = 0, in_mask = 0;
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      ++in_mask;
      if (box.contains(static_cast<int>(x), static_cast<int>(y))) ++inter;
    }
  const double uni = static_cast<double>(in_mask) + box.area() - static_cast<double>(inter);
  return uni > 0.0 ? static_cast<double>(inter) / uni : 0.0;
}

GrayImage heatmap_to_gray(const Heatmap& heatmap) {
  GrayImage g{heatmap.width, heatmap.height, std::vector<std::uint8_t>(heatmap.values.size())};
  for (std::size_t i = 0; i < heatmap.values.size(); ++i)
    g.values[i] = static_cast<std::uint8_t>(std::lround(std::clamp(heatmap.values[i], 0.0, 1.0) * 255.0));
  return g;
}

Image render_overlay(const Image& image, const RegionMask& mask) {
  if (mask.width != image.width || mask.height != image.height)
    throw ShapeError("overlay: mask and image sizes differ");
  Image out = image;
  constexpr std::uint8_t red[3] = {255, 0, 0};
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      if (!mask.at(x, y)) continue;
      for (std::size_t c = 0; c < 3; ++c)
        out.at(x, y, c) = static_cast<std::uint8_t>((out.at(x, y, c) + red[c] + 1) / 2);
    }
  auto paint = [&](int x, int y) {
    for (std::size_t c = 0; c < 3; ++c) out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y), c) = red[c];
  };
  for (const Box& b : mask.components) {
    for (int x = b.x0; x < b.x1; ++x) {
      paint(x, b.y0);
      paint(x, b.y1 - 1);
    }
    for (int y = b.y0; y < b.y1; ++y) {
      paint(b.x0, y);
      paint(b.x1 - 1, y);
    }
  }
  return out;
}

void export_heatmap(const Heatmap& heatmap, const std::filesystem::path& path) {
  write_pgm(path, heatmap_to_gray(heatmap));
}

void export_overlay(const Image& image, const RegionMask& mask, const std::filesystem::path& path) {
  write_ppm(path, render_overlay(image, mask));
}

}  // namespace deepfd
