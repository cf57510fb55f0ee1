#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "deepfd/adam.hpp"
#include "deepfd/graph.hpp"
#include "deepfd/params.hpp"

namespace deepfd {

// y = 0 is fake, y = 1 is real. Output channel/logit indices follow the same
// convention: index 0 carries fake evidence.
enum class Authenticity : int { fake = 0, real = 1 };

inline const char* to_string(Authenticity a) { return a == Authenticity::fake ? "fake" : "real"; }

inline constexpr std::size_t kImageSize = 64;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kEmbeddingSize = 128;
inline constexpr std::size_t kMapChannels = 256;
inline constexpr std::size_t kMapSize = 4;

// Weights of the feature network (names prefixed "d1.") and the classifier
// head ("d2.").
template <typename T>
using ModelParams = ParamSet<T>;

// Every (name, dims) pair of the architecture, in serialization order.
std::vector<std::pair<std::string, Dims>> parameter_layout();

// He-normal weights (std sqrt(2 / fan_in)), zero biases. Deterministic per seed.
template <typename T>
ModelParams<T> init_params(std::uint64_t seed);

// Throws ShapeError unless `params` holds exactly parameter_layout().
template <typename T>
void audit_shapes(const ModelParams<T>& params);

inline bool is_d1_param(std::string_view name) { return name.starts_with("d1."); }
inline bool is_d2_param(std::string_view name) { return name.starts_with("d2."); }
// Parameters that influence the classifier output. The embedding layer
// (d1.fc) only feeds the contrastive loss.
inline bool is_classifier_path_param(std::string_view name) { return !name.starts_with("d1.fc."); }

// Parameters recorded as leaves of one graph.
class ParamBinding {
 public:
  void set(const std::string& name, VarId id) { ids_[name] = id; }
  VarId operator[](const std::string& name) const;

 private:
  std::map<std::string, VarId> ids_;
};

// Records every parameter on `graph`. Those accepted by `trainable` (all when
// empty) become gradient-tracking leaves bound to `params`; the rest are
// constants.
template <typename T>
ParamBinding bind_params(Graph<T>& graph, ModelParams<T>& params, const ParamFilter& trainable = {});
template <typename T>
ParamBinding bind_frozen(Graph<T>& graph, const ModelParams<T>& params);

struct D1Vars {
  VarId embedding;   // N x 128 (or 128)
  VarId stage3_map;  // N x 256 x 4 x 4 (or 256 x 4 x 4)
};

struct D2Vars {
  VarId loc_map;  // N x 2 x 4 x 4
  VarId logits;   // N x 2
  VarId probs;    // N x 2
};

// Feature network: 7x7/4 stem, three residual stages (96, 128, 256 channels,
// the last two downsampling by 2), then a 128-unit fully connected embedding.
// `images` is 3 x 64 x 64 or N x 3 x 64 x 64, normalized to [-1, 1].
template <typename T>
D1Vars d1_forward(Graph<T>& graph, const ParamBinding& params, VarId images);

// Classifier head on the stage-3 map: 3x3 conv to 2 channels, global average
// pooling, 2x2 fully connected layer, softmax.
template <typename T>
D2Vars d2_forward(Graph<T>& graph, const ParamBinding& params, VarId stage3_map);

template <typename T>
struct ForwardOutputs {
  Tensor<T> embedding;
  Tensor<T> stage3_map;
  Tensor<T> loc_map;
  Tensor<T> logits;
  Tensor<T> probs;
};

// Inference pass over one image or a batch.
template <typename T>
ForwardOutputs<T> forward(const Tensor<T>& images, const ModelParams<T>& params);

struct Detection {
  Authenticity label = Authenticity::fake;
  double p_fake = 0.0;
  double p_real = 0.0;
};

// argmax over (p_fake, p_real); an exact tie resolves to fake.
inline Authenticity label_from_probs(double p_fake, double p_real) {
  return p_real > p_fake ? Authenticity::real : Authenticity::fake;
}

template <typename T>
Detection detect(const Tensor<T>& image, const ModelParams<T>& params);

// Detections for a batch (N x 3 x 64 x 64).
template <typename T>
std::vector<Detection> detect_batch(const Tensor<T>& images, const ModelParams<T>& params);

}  // namespace deepfd
