#include "deepfd/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>

#include "deepfd/image.hpp"

namespace deepfd {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

constexpr char kMagic[4] = {'D', 'F', 'D', '1'};
const std::string kConfigTensor = "meta.config";
const std::string kStepTensor = "adam.step";

class Writer {
 public:
  template <typename Int>
  void put(Int v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(Int));
  }
  void put_floats(std::span<const float> values) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes.insert(bytes.end(), p, p + values.size_bytes());
  }
  void tensor(const std::string& name, const Dims& dims, std::span<const float> values) {
    if (name.size() > 0xffff) throw ArgumentError("checkpoint: tensor name too long");
    put(static_cast<std::uint16_t>(name.size()));
    bytes.insert(bytes.end(), name.begin(), name.end());
    put(static_cast<std::uint8_t>(dims.size()));
    for (auto d : dims) put(static_cast<std::uint32_t>(d));
    put_floats(values);
  }
  void series(const std::vector<float>& values) {
    put(static_cast<std::uint32_t>(values.size()));
    put_floats(values);
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <typename Int>
  Int get() {
    need(sizeof(Int));
    Int v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(Int));
    pos_ += sizeof(Int);
    return v;
  }
  std::vector<float> floats(std::size_t count) {
    if (count > (bytes_.size() - pos_) / sizeof(float))
      throw CorruptionError("truncated", "checkpoint: truncated float payload");
    std::vector<float> out(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
    return out;
  }
  NamedTensor<float> tensor() {
    const auto name_len = get<std::uint16_t>();
    need(name_len);
    std::string name(reinterpret_cast<const char*>(bytes_.data() + pos_), name_len);
    pos_ += name_len;
    const auto rank = get<std::uint8_t>();
    if (rank == 0 || rank > 4) throw CorruptionError("layout", "checkpoint: bad rank for " + name);
    Dims dims(rank);
    for (auto& d : dims) {
      d = get<std::uint32_t>();
      if (d == 0) throw CorruptionError("layout", "checkpoint: zero dimension in " + name);
    }
    return {std::move(name), Tensor<float>(dims, floats(dims_product(dims)))};
  }
  std::vector<float> series() { return floats(get<std::uint32_t>()); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptionError("truncated", "checkpoint: unexpected end of data");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes.insert(w.bytes.end(), std::begin(kMagic), std::end(kMagic));
  w.put(kCheckpointVersion);

  const std::string config_text = format_config(ckpt.config);
  const std::vector<float> config_bytes(config_text.begin(), config_text.end());
  w.put(static_cast<std::uint32_t>(ckpt.params.size() + 1));
  for (const auto& e : ckpt.params.entries()) w.tensor(e.name, e.tensor.dims(), e.tensor.data());
  w.tensor(kConfigTensor, {config_bytes.size()}, config_bytes);

  if (ckpt.adam.step >= (1u << 24)) throw ArgumentError("checkpoint: Adam step count exceeds f32 range");
  const auto& m = ckpt.adam.first_moment.entries();
  const auto& v = ckpt.adam.second_moment.entries();
  w.put(static_cast<std::uint32_t>(m.size() + v.size() + 1));
  for (const auto& e : m) w.tensor("m." + e.name, e.tensor.dims(), e.tensor.data());
  for (const auto& e : v) w.tensor("v." + e.name, e.tensor.dims(), e.tensor.data());
  const float step = static_cast<float>(ckpt.adam.step);
  w.tensor(kStepTensor, {1}, std::span(&step, 1));

  w.put(ckpt.epoch);
  w.series(ckpt.phase1_losses);
  w.series(ckpt.phase2_losses);
  w.put(crc32_of(std::span(w.bytes).subspan(sizeof(kMagic))));
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw CorruptionError("magic", "checkpoint: bad magic bytes");
  if (bytes.size() < sizeof(kMagic) + 8) throw CorruptionError("truncated", "checkpoint: file too short");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointVersion)
    throw CorruptionError("version", "checkpoint: unsupported version " + std::to_string(version) +
                                         " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto body = bytes.subspan(sizeof(kMagic), bytes.size() - sizeof(kMagic) - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, sizeof(stored_crc));
  if (crc32_of(body) != stored_crc) throw CorruptionError("crc", "checkpoint: CRC mismatch");

  Reader r(body.subspan(4));
  Checkpoint ckpt;
  std::optional<std::string> config_text;
  const auto n_tensors = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto t = r.tensor();
    if (t.name == kConfigTensor) {
      config_text.emplace();
      for (float f : t.tensor.data()) config_text->push_back(static_cast<char>(f));
    } else {
      ckpt.params.add(std::move(t.name), std::move(t.tensor));
    }
  }
  if (!config_text) throw CorruptionError("layout", "checkpoint: missing config snapshot");
  try {
    ckpt.config = parse_config(*config_text);
  } catch (const ConfigError& e) {
    throw CorruptionError("layout", std::string("checkpoint: bad config snapshot: ") + e.what());
  }

  bool have_step = false;
  const auto n_adam = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_adam; ++i) {
    auto t = r.tensor();
    if (t.name == kStepTensor) {
      ckpt.adam.step = static_cast<std::uint64_t>(t.tensor[0]);
      have_step = true;
    } else if (t.name.starts_with("m.")) {
      ckpt.adam.first_moment.add(t.name.substr(2), std::move(t.tensor));
    } else if (t.name.starts_with("v.")) {
      ckpt.adam.second_moment.add(t.name.substr(2), std::move(t.tensor));
    } else {
      throw CorruptionError("layout", "checkpoint: unexpected optimizer tensor " + t.name);
    }
  }
  if (!have_step) throw CorruptionError("layout", "checkpoint: missing Adam step counter");
  ckpt.epoch = r.get<std::uint32_t>();
  ckpt.phase1_losses = r.series();
  ckpt.phase2_losses = r.series();
  if (!r.done()) throw CorruptionError("layout", "checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace deepfd
