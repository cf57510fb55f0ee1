#pragma once

#include <functional>
#include <vector>

#include "deepfd/checkpoint.hpp"
#include "deepfd/dataset.hpp"

namespace deepfd {

struct TrainHooks {
  // Called after every optimizer step: phase (1 or 2), global iteration, loss.
  std::function<void(int phase, std::size_t iteration, double loss)> on_iteration;
  // Called with the full state after every completed epoch.
  std::function<void(const Checkpoint&)> on_epoch_end;
};

// Contrastive warm-up: `cfg.contrastive_epochs()` epochs of siamese pairs
// through D1 only (D2 is neither read nor updated). Returns the per-iteration
// batch-mean contrastive loss. Throws DivergenceError on a non-finite loss.
std::vector<float> train_phase1(const Dataset& dataset, const TrainConfig& cfg,
                                ModelParams<float>& params, AdamState<float>& adam);
std::vector<float> train_phase1(const Dataset& dataset, const TrainConfig& cfg,
                                ModelParams<float>& params);

// Classifier training: `cfg.classifier_epochs()` epochs of labelled batches
// through D1 and D2, updating every parameter. Returns the per-iteration
// batch-mean cross-entropy.
std::vector<float> train_phase2(const Dataset& dataset, const TrainConfig& cfg,
                                ModelParams<float>& params, AdamState<float>& adam);
std::vector<float> train_phase2(const Dataset& dataset, const TrainConfig& cfg,
                                ModelParams<float>& params);

// Fresh initialization from cfg.seed, then both phases.
Checkpoint train(const Dataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks = {});
// Continues a checkpoint from its epoch counter to the end of its schedule.
Checkpoint resume(const Dataset& dataset, Checkpoint ckpt, const TrainHooks& hooks = {});

// Mean pairwise embedding distance within a class and across classes.
struct SeparationStats {
  double intra = 0.0;
  double inter = 0.0;
  double ratio() const { return inter > 0.0 ? intra / inter : 0.0; }
};
SeparationStats embedding_separation(const Dataset& dataset, const ModelParams<float>& params);

// Embeddings (N x 128) for every sample, computed in batches.
Tensor<float> embed_all(const Dataset& dataset, const ModelParams<float>& params,
                        std::size_t batch_size = 64);

}  // namespace deepfd
