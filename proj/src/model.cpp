#include "deepfd/model.hpp"

#include <cassert>
#include <cmath>
#include <random>

namespace deepfd {
namespace {

struct StageSpec {
  const char* name;
  std::size_t in_channels;
  std::size_t channels;
  bool downsample;
};

constexpr StageSpec kStages[] = {
    {"d1.stage1", 96, 96, false},
    {"d1.stage2", 96, 128, true},
    {"d1.stage3", 128, 256, true},
};
constexpr std::size_t kBlocksPerStage = 2;

std::string block_name(const StageSpec& stage, std::size_t block) {
  return std::string(stage.name) + ".block" + std::to_string(block);
}

[[maybe_unused]] bool has_dims(const Dims& actual, std::size_t batch, bool batched, Dims tail) {
  if (batched) tail.insert(tail.begin(), batch);
  return actual == tail;
}

template <typename T>
VarId residual_block(Graph<T>& g, const ParamBinding& p, const std::string& name, VarId x,
                     bool downsample, bool project) {
  const std::size_t stride = downsample ? 2 : 1;
  VarId h = g.relu(g.conv2d(x, p[name + ".conv1.weight"], p[name + ".conv1.bias"], stride, 1));
  h = g.conv2d(h, p[name + ".conv2.weight"], p[name + ".conv2.bias"], 1, 1);
  VarId shortcut =
      project ? g.conv2d(x, p[name + ".shortcut.weight"], p[name + ".shortcut.bias"], stride, 0)
              : x;
  return g.relu(g.add(h, shortcut));
}

}  // namespace

std::vector<std::pair<std::string, Dims>> parameter_layout() {
  std::vector<std::pair<std::string, Dims>> layout;
  auto conv = [&](const std::string& name, std::size_t out, std::size_t in, std::size_t k) {
    layout.emplace_back(name + ".weight", Dims{out, in, k, k});
    layout.emplace_back(name + ".bias", Dims{out});
  };
  conv("d1.stem", 96, kImageChannels, 7);
  for (const auto& stage : kStages) {
    for (std::size_t b = 0; b < kBlocksPerStage; ++b) {
      const std::size_t in = b == 0 ? stage.in_channels : stage.channels;
      const std::string name = block_name(stage, b);
      conv(name + ".conv1", stage.channels, in, 3);
      conv(name + ".conv2", stage.channels, stage.channels, 3);
      if (b == 0 && stage.downsample) conv(name + ".shortcut", stage.channels, in, 1);
    }
  }
  layout.emplace_back("d1.fc.weight", Dims{kEmbeddingSize, kMapChannels * kMapSize * kMapSize});
  layout.emplace_back("d1.fc.bias", Dims{kEmbeddingSize});
  conv("d2.conv", 2, kMapChannels, 3);
  layout.emplace_back("d2.fc.weight", Dims{2, 2});
  layout.emplace_back("d2.fc.bias", Dims{2});
  return layout;
}

template <typename T>
ModelParams<T> init_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams<T> params;
  for (auto& [name, dims] : parameter_layout()) {
    Tensor<T> t(dims);
    // The last conv of every residual branch starts at zero, so each block is
    // an identity map at initialization and activations keep the stem's scale.
    if (dims.size() > 1 && !name.ends_with(".conv2.weight")) {
      const std::size_t fan_in = t.size() / dims[0];
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    }
    params.add(name, std::move(t));
  }
  return params;
}

template <typename T>
void audit_shapes(const ModelParams<T>& params) {
  const auto layout = parameter_layout();
  if (params.size() != layout.size())
    throw ShapeError("parameter audit: expected " + std::to_string(layout.size()) +
                     " tensors, found " + std::to_string(params.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& e = params.entries()[i];
    if (e.name != layout[i].first)
      throw ShapeError("parameter audit: expected " + layout[i].first + " at position " +
                       std::to_string(i) + ", found " + e.name);
    if (e.tensor.dims() != layout[i].second)
      throw ShapeError("parameter audit: " + e.name + " has dims " + dims_string(e.tensor.dims()) +
                       ", expected " + dims_string(layout[i].second));
  }
}

VarId ParamBinding::operator[](const std::string& name) const {
  auto it = ids_.find(name);
  if (it == ids_.end()) throw ArgumentError("parameter not bound: " + name);
  return it->second;
}

template <typename T>
ParamBinding bind_params(Graph<T>& graph, ModelParams<T>& params, const ParamFilter& trainable) {
  ParamBinding binding;
  for (auto& e : params.entries()) {
    const bool train = !trainable || trainable(e.name);
    binding.set(e.name, train ? graph.parameter(e.tensor) : graph.input(e.tensor));
  }
  return binding;
}

template <typename T>
ParamBinding bind_frozen(Graph<T>& graph, const ModelParams<T>& params) {
  ParamBinding binding;
  for (const auto& e : params.entries()) binding.set(e.name, graph.input(e.tensor));
  return binding;
}

template <typename T>
D1Vars d1_forward(Graph<T>& g, const ParamBinding& p, VarId images) {
  const Dims& in = g.value(images).dims();
  const bool batched = in.size() == 4;
  const std::size_t n = batched ? in[0] : 1;
  if (!has_dims(in, n, batched, {kImageChannels, kImageSize, kImageSize}))
    throw ShapeError("d1_forward: expected 3x64x64 images, got " + dims_string(in));

  VarId x = g.relu(g.conv2d(images, p["d1.stem.weight"], p["d1.stem.bias"], 4, 3));
  assert(has_dims(g.value(x).dims(), n, batched, {96, 16, 16}));
  for (const auto& stage : kStages)
    for (std::size_t b = 0; b < kBlocksPerStage; ++b)
      x = residual_block(g, p, block_name(stage, b), x, b == 0 && stage.downsample,
                         b == 0 && stage.downsample);
  assert(has_dims(g.value(x).dims(), n, batched, {kMapChannels, kMapSize, kMapSize}));

  VarId embedding = g.linear(g.flatten(x), p["d1.fc.weight"], p["d1.fc.bias"]);
  return D1Vars{embedding, x};
}

template <typename T>
D2Vars d2_forward(Graph<T>& g, const ParamBinding& p, VarId stage3_map) {
  const Dims& in = g.value(stage3_map).dims();
  const bool batched = in.size() == 4;
  const std::size_t n = batched ? in[0] : 1;
  if (!has_dims(in, n, batched, {kMapChannels, kMapSize, kMapSize}))
    throw ShapeError("d2_forward: expected 256x4x4 map, got " + dims_string(in));

  VarId loc = g.conv2d(stage3_map, p["d2.conv.weight"], p["d2.conv.bias"], 1, 1);
  VarId logits = g.linear(g.global_avg_pool(loc), p["d2.fc.weight"], p["d2.fc.bias"]);
  VarId probs = g.softmax(logits);
  assert(has_dims(g.value(loc).dims(), n, batched, {2, kMapSize, kMapSize}));
  return D2Vars{loc, logits, probs};
}

template <typename T>
ForwardOutputs<T> forward(const Tensor<T>& images, const ModelParams<T>& params) {
  Graph<T> g;
  const ParamBinding p = bind_frozen(g, params);
  const D1Vars d1 = d1_forward(g, p, g.input(images));
  const D2Vars d2 = d2_forward(g, p, d1.stage3_map);
  return ForwardOutputs<T>{g.value(d1.embedding), g.value(d1.stage3_map), g.value(d2.loc_map),
                           g.value(d2.logits), g.value(d2.probs)};
}

template <typename T>
std::vector<Detection> detect_batch(const Tensor<T>& images, const ModelParams<T>& params) {
  const ForwardOutputs<T> out = forward(images, params);
  const std::size_t n = out.probs.size() / 2;
  std::vector<Detection> detections(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& d = detections[i];
    d.p_fake = static_cast<double>(out.probs[2 * i]);
    d.p_real = static_cast<double>(out.probs[2 * i + 1]);
    d.label = label_from_probs(d.p_fake, d.p_real);
  }
  return detections;
}

template <typename T>
Detection detect(const Tensor<T>& image, const ModelParams<T>& params) {
  if (image.rank() != 3) throw ShapeError("detect: expected a single 3x64x64 image");
  return detect_batch(image, params).front();
}

#define DEEPFD_INSTANTIATE(T)                                                              \
  template ModelParams<T> init_params<T>(std::uint64_t);                                   \
  template void audit_shapes(const ModelParams<T>&);                                       \
  template ParamBinding bind_params(Graph<T>&, ModelParams<T>&, const ParamFilter&);       \
  template ParamBinding bind_frozen(Graph<T>&, const ModelParams<T>&);                     \
  template D1Vars d1_forward(Graph<T>&, const ParamBinding&, VarId);                       \
  template D2Vars d2_forward(Graph<T>&, const ParamBinding&, VarId);                       \
  template ForwardOutputs<T> forward(const Tensor<T>&, const ModelParams<T>&);             \
  template std::vector<Detection> detect_batch(const Tensor<T>&, const ModelParams<T>&);   \
  template Detection detect(const Tensor<T>&, const ModelParams<T>&);

DEEPFD_INSTANTIATE(float)
DEEPFD_INSTANTIATE(double)

#undef DEEPFD_INSTANTIATE

}  // namespace deepfd
