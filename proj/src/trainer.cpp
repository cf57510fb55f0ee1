#include "deepfd/trainer.hpp"

#include <cmath>
#include <numeric>
#include <unordered_map>

#include "deepfd/random.hpp"

namespace deepfd {
namespace {

void check_finite(double loss, int phase, std::size_t iteration) {
  if (!std::isfinite(loss))
    throw DivergenceError("non-finite loss in phase " + std::to_string(phase) + " at iteration " +
                          std::to_string(iteration));
}

class EpochRunner {
 public:
  EpochRunner(const Dataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks)
      : dataset_(dataset), cfg_(cfg), hooks_(hooks) {
    for (std::size_t i = 0; i < dataset.size(); ++i) index_of_[dataset[i].id] = i;
  }

  void contrastive_epoch(std::size_t epoch, ModelParams<float>& params, AdamState<float>& adam,
                         std::vector<float>& losses) {
    auto pairs = sample_pairs(dataset_, cfg_.pairs_for(dataset_.size()),
                              derive_seed(cfg_.seed, kStreamPairs, epoch));
    const auto batches =
        make_batches(std::move(pairs), cfg_.batch_size, derive_seed(cfg_.seed, kStreamPhase1Batches, epoch));
    for (const auto& batch : batches) {
      const std::size_t n = batch.size();
      std::vector<std::size_t> indices(2 * n);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) {
        indices[i] = index_of_.at(batch[i].id_a);
        indices[n + i] = index_of_.at(batch[i].id_b);
        labels[i] = batch[i].p.value;
      }
      // Both members of every pair go through the same weights in one pass.
      params.clear_grads();
      Graph<float> g;
      const ParamBinding p = bind_params(g, params, is_d1_param);
      const D1Vars d1 = d1_forward(g, p, g.input(batch_tensor<float>(dataset_, indices)));
      const VarId e_w = g.l2_distance(g.rows(d1.embedding, 0, n), g.rows(d1.embedding, n, 2 * n));
      const VarId loss = g.mean(g.contrastive_loss(e_w, labels, static_cast<float>(cfg_.margin)));
      const double value = g.value(loss)[0];
      check_finite(value, 1, losses.size());
      g.backward(loss);
      adam_step(params, adam, cfg_.lr, is_d1_param);
      losses.push_back(static_cast<float>(value));
      if (hooks_.on_iteration) hooks_.on_iteration(1, losses.size() - 1, value);
    }
  }

  void classifier_epoch(std::size_t epoch, ModelParams<float>& params, AdamState<float>& adam,
                        std::vector<float>& losses, std::size_t iteration_offset) {
    std::vector<std::size_t> order(dataset_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batches =
        make_batches(std::move(order), cfg_.batch_size, derive_seed(cfg_.seed, kStreamPhase2Batches, epoch));
    for (const auto& batch : batches) {
      std::vector<int> labels(batch.size());
      for (std::size_t i = 0; i < batch.size(); ++i) labels[i] = static_cast<int>(dataset_[batch[i]].y);
      params.clear_grads();
      Graph<float> g;
      const ParamBinding p = bind_params(g, params, is_classifier_path_param);
      const D1Vars d1 = d1_forward(g, p, g.input(batch_tensor<float>(dataset_, batch)));
      const D2Vars d2 = d2_forward(g, p, d1.stage3_map);
      const VarId loss = g.mean(g.cross_entropy(d2.logits, labels));
      const double value = g.value(loss)[0];
      check_finite(value, 2, iteration_offset + losses.size());
      g.backward(loss);
      adam_step(params, adam, cfg_.lr, is_classifier_path_param);
      losses.push_back(static_cast<float>(value));
      if (hooks_.on_iteration) hooks_.on_iteration(2, iteration_offset + losses.size() - 1, value);
    }
  }

 private:
  const Dataset& dataset_;
  const TrainConfig& cfg_;
  const TrainHooks& hooks_;
  std::unordered_map<std::uint64_t, std::size_t> index_of_;
};

}  // namespace

std::vector<float> train_phase1(const Dataset& dataset, const TrainConfig& cfg,
                                ModelParams<float>& params, AdamState<float>& adam) {
  cfg.validate();
  audit_shapes(params);
  const TrainHooks hooks;
  EpochRunner runner(dataset, cfg, hooks);
  std::vector<float> losses;
  for (std::size_t e = 0; e < cfg.contrastive_epochs(); ++e) runner.contrastive_epoch(e, params, adam, losses);
  return losses;
}

std::vector<float> train_phase1(const Dataset& dataset, const TrainConfig& cfg, ModelParams<float>& params) {
  auto adam = AdamState<float>::zeros_like(params);
  return train_phase1(dataset, cfg, params, adam);
}

std::vector<float> train_phase2(const Dataset& dataset, const TrainConfig& cfg,
                                ModelParams<float>& params, AdamState<float>& adam) {
  cfg.validate();
  audit_shapes(params);
  const TrainHooks hooks;
  EpochRunner runner(dataset, cfg, hooks);
  std::vector<float> losses;
  for (std::size_t e = 0; e < cfg.classifier_epochs(); ++e) runner.classifier_epoch(e, params, adam, losses, 0);
  return losses;
}

std::vector<float> train_phase2(const Dataset& dataset, const TrainConfig& cfg, ModelParams<float>& params) {
  auto adam = AdamState<float>::zeros_like(params);
  return train_phase2(dataset, cfg, params, adam);
}

Checkpoint train(const Dataset& dataset, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.params = init_params<float>(cfg.seed);
  ckpt.adam = AdamState<float>::zeros_like(ckpt.params);
  return resume(dataset, std::move(ckpt), hooks);
}

Checkpoint resume(const Dataset& dataset, Checkpoint ckpt, const TrainHooks& hooks) {
  const TrainConfig& cfg = ckpt.config;
  cfg.validate();
  audit_shapes(ckpt.params);
  audit_shapes(ckpt.adam.first_moment);
  audit_shapes(ckpt.adam.second_moment);
  EpochRunner runner(dataset, cfg, hooks);
  const std::size_t p1 = cfg.contrastive_epochs();
  while (ckpt.epoch < cfg.epochs) {
    const std::size_t e = ckpt.epoch;
    if (e < p1)
      runner.contrastive_epoch(e, ckpt.params, ckpt.adam, ckpt.phase1_losses);
    else
      runner.classifier_epoch(e - p1, ckpt.params, ckpt.adam, ckpt.phase2_losses,
                              ckpt.phase1_losses.size());
    ++ckpt.epoch;
    if (hooks.on_epoch_end) hooks.on_epoch_end(ckpt);
  }
  return ckpt;
}

Tensor<float> embed_all(const Dataset& dataset, const ModelParams<float>& params, std::size_t batch_size) {
  if (dataset.empty()) throw ArgumentError("embed_all: empty dataset");
  Tensor<float> out(Dims{dataset.size(), kEmbeddingSize});
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    std::vector<std::size_t> indices(end - start);
    std::iota(indices.begin(), indices.end(), start);
    Graph<float> g;
    const ParamBinding p = bind_frozen(g, params);
    const D1Vars d1 = d1_forward(g, p, g.input(batch_tensor<float>(dataset, indices)));
    const auto& e = g.value(d1.embedding);
    std::copy(e.data().begin(), e.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * kEmbeddingSize));
  }
  return out;
}

SeparationStats embedding_separation(const Dataset& dataset, const ModelParams<float>& params) {
  const Tensor<float> emb = embed_all(dataset, params);
  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    for (std::size_t j = i + 1; j < dataset.size(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kEmbeddingSize; ++k) {
        const double d = static_cast<double>(emb[i * kEmbeddingSize + k]) - emb[j * kEmbeddingSize + k];
        acc += d * d;
      }
      const double dist = std::sqrt(acc);
      if (dataset[i].y == dataset[j].y) {
        intra += dist;
        ++n_intra;
      } else {
        inter += dist;
        ++n_inter;
      }
    }
  SeparationStats s;
  s.intra = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
  s.inter = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
  return s;
}

}  // namespace deepfd
