#include "deepfd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepfd/error.hpp"

namespace deepfd {

double similarity_ew(std::span<const double> r1, std::span<const double> r2) {
  if (r1.size() != r2.size())
    throw ShapeError("similarity_ew: lengths " + std::to_string(r1.size()) + " and " +
                     std::to_string(r2.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < r1.size(); ++i) acc += (r1[i] - r2[i]) * (r1[i] - r2[i]);
  return std::sqrt(acc);
}

double contrastive_loss(int p, double e_w, double margin) {
  if (p != 0 && p != 1) throw ArgumentError("contrastive_loss: pair label must be 0 or 1");
  if (!(e_w >= 0.0)) throw ArgumentError("contrastive_loss: distance must be non-negative");
  if (!(margin > 0.0)) throw ArgumentError("contrastive_loss: margin must be positive");
  if (p == 1) return 0.5 * e_w * e_w;
  const double hinge = std::max(0.0, margin - e_w);
  return 0.5 * hinge * hinge;
}

double cross_entropy(std::span<const double> probs, int y) {
  if (y != 0 && y != 1) throw ArgumentError("cross_entropy: label must be 0 or 1");
  if (probs.size() != 2) throw ShapeError("cross_entropy: expected two probabilities");
  return -std::log(std::max(probs[static_cast<std::size_t>(y)], 1e-300));
}

double cross_entropy_from_logits(std::span<const double> logits, int y) {
  if (y != 0 && y != 1) throw ArgumentError("cross_entropy: label must be 0 or 1");
  if (logits.size() != 2) throw ShapeError("cross_entropy: expected two logits");
  const double mx = std::max(logits[0], logits[1]);
  const double lse = mx + std::log(std::exp(logits[0] - mx) + std::exp(logits[1] - mx));
  return lse - logits[static_cast<std::size_t>(y)];
}

}  // namespace deepfd
