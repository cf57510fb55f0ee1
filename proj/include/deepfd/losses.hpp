#pragma once

#include <span>

namespace deepfd {

// Pair label: 1 for same-authenticity pairs (fake-fake, real-real), 0 otherwise.
struct PairLabel {
  int value = 0;
};

struct Margin {
  double value = 0.5;
};

// Euclidean distance between two embeddings. Throws ShapeError on length mismatch.
double similarity_ew(std::span<const double> r1, std::span<const double> r2);

// 1/2 (p E^2 + (1 - p) max(0, m - E)^2). Throws ArgumentError for E < 0,
// p outside {0,1} or a non-positive margin.
double contrastive_loss(int p, double e_w, double margin);
inline double contrastive_loss(PairLabel p, double e_w, Margin m) {
  return contrastive_loss(p.value, e_w, m.value);
}

// -log(probs[y]) for a two-class distribution; log argument floored at 1e-300.
double cross_entropy(std::span<const double> probs, int y);
// -log softmax(logits)[y] via log-sum-exp; never takes the log of a stored probability.
double cross_entropy_from_logits(std::span<const double> logits, int y);

}  // namespace deepfd
