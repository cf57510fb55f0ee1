#include "deepfd/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "deepfd/error.hpp"
#include "deepfd/image.hpp"

namespace deepfd {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename Number>
Number parse_number(const std::string& key, const std::string& value) {
  Number v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ConfigError("invalid value '" + value + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(margin > 0.0)) throw ConfigError("margin must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (phase1_epochs > epochs) throw ConfigError("phase1_epochs must not exceed epochs");
  if (pairs_per_epoch && *pairs_per_epoch == 0) throw ConfigError("pairs_per_epoch must be positive");
  if (!(test_fraction_real >= 0.0 && test_fraction_real < 1.0))
    throw ConfigError("test_fraction_real must be in [0, 1)");
}

TrainConfig ablation_of(TrainConfig cfg) {
  cfg.use_contrastive = false;
  cfg.phase1_epochs = 0;
  return cfg;
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "lr") cfg.lr = parse_number<double>(key, value);
  else if (key == "epochs") cfg.epochs = parse_number<std::size_t>(key, value);
  else if (key == "phase1_epochs") cfg.phase1_epochs = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "margin") cfg.margin = parse_number<double>(key, value);
  else if (key == "pairs_per_epoch") {
    if (value == "auto") cfg.pairs_per_epoch.reset();
    else cfg.pairs_per_epoch = parse_number<std::size_t>(key, value);
  } else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "use_contrastive") cfg.use_contrastive = parse_bool(key, value);
  else if (key == "test_fraction_real") cfg.test_fraction_real = parse_number<double>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const LoadError&) {
    throw ConfigError(path.string() + ": cannot read config file");
  }
  return parse_config(std::string(bytes.begin(), bytes.end()), std::move(base));
}

std::string format_config(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "lr = " << format_double(cfg.lr) << '\n'
     << "epochs = " << cfg.epochs << '\n'
     << "phase1_epochs = " << cfg.phase1_epochs << '\n'
     << "batch_size = " << cfg.batch_size << '\n'
     << "margin = " << format_double(cfg.margin) << '\n'
     << "pairs_per_epoch = "
     << (cfg.pairs_per_epoch ? std::to_string(*cfg.pairs_per_epoch) : std::string("auto")) << '\n'
     << "seed = " << cfg.seed << '\n'
     << "use_contrastive = " << (cfg.use_contrastive ? "true" : "false") << '\n'
     << "test_fraction_real = " << format_double(cfg.test_fraction_real) << '\n';
  return os.str();
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
  const std::string text = format_config(cfg);
  return fnv1a(text.data(), text.size());
}

}  // namespace deepfd
