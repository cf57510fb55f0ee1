#include <charconv>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "deepfd/dataset.hpp"
#include "deepfd/random.hpp"

namespace fs = std::filesystem;

namespace deepfd {
namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(std::move(cur));
  return parts;
}

template <typename Int>
Int parse_int(const std::string& text, const std::string& context) {
  Int v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw LoadError(context + ": invalid integer '" + text + "'");
  return v;
}

std::string file_name(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05llu.ppm", static_cast<unsigned long long>(id));
  return buf;
}

struct ManifestEntry {
  std::uint64_t id;
  std::optional<Box> box;
};

std::map<std::string, ManifestEntry> read_manifest(const fs::path& path) {
  std::map<std::string, ManifestEntry> entries;
  std::istringstream in(std::string([&] {
    auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
  }()));
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    const auto cols = split(line, '\t');
    if (cols.size() != 5) throw LoadError(path.string() + ": expected 5 columns in '" + line + "'");
    ManifestEntry e{parse_int<std::uint64_t>(cols[0], path.string()), std::nullopt};
    if (!cols[4].empty()) e.box = parse_box(cols[4]);
    entries[cols[1]] = e;
  }
  return entries;
}

}  // namespace

std::string format_box(const Box& b) {
  return std::to_string(b.x0) + "," + std::to_string(b.y0) + "," + std::to_string(b.x1) + "," +
         std::to_string(b.y1);
}

Box parse_box(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw LoadError("invalid box '" + text + "'");
  Box b{parse_int<int>(parts[0], "box"), parse_int<int>(parts[1], "box"),
        parse_int<int>(parts[2], "box"), parse_int<int>(parts[3], "box")};
  if (b.x0 < 0 || b.y0 < 0 || b.x1 <= b.x0 || b.y1 <= b.y0 ||
      b.x1 > static_cast<int>(kImageSize) || b.y1 > static_cast<int>(kImageSize))
    throw LoadError("box '" + text + "' is outside the image");
  return b;
}

void write_dataset(const Dataset& dataset, const fs::path& root) {
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError(root.string() + ": cannot create directory");
  std::ostringstream manifest;
  manifest << "id\tpath\ty\tsource\tbox\n";
  std::set<std::string> made;
  for (const auto& s : dataset) {
    if (made.insert(s.source).second) {
      fs::create_directories(root / s.source, ec);
      if (ec) throw IoError((root / s.source).string() + ": cannot create directory");
    }
    const std::string rel = s.source + "/" + file_name(s.id);
    write_ppm(root / rel, s.pixels);
    manifest << s.id << '\t' << rel << '\t' << static_cast<int>(s.y) << '\t' << s.source << '\t'
             << (s.artifact_box ? format_box(*s.artifact_box) : "") << '\n';
  }
  write_text_atomic(root / "manifest.tsv", manifest.str());
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw LoadError(root.string() + ": not a directory");
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name == kRealSource || name.starts_with("fake_")) class_dirs.push_back(entry.path());
  }
  if (class_dirs.empty()) throw LoadError(root.string() + ": no real/ or fake_*/ directories");
  std::sort(class_dirs.begin(), class_dirs.end());

  std::map<std::string, ManifestEntry> manifest;
  if (fs::exists(root / "manifest.tsv")) manifest = read_manifest(root / "manifest.tsv");

  Dataset data;
  std::set<std::uint64_t> ids;
  std::uint64_t next_id = 0;
  for (const auto& dir : class_dirs) {
    const std::string source = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    if (files.empty()) throw LoadError(dir.string() + ": empty class directory");
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      if (file.extension() != ".ppm") throw LoadError(file.string() + ": not a .ppm file");
      Image img = read_ppm(file);
      if (img.width != kImageSize || img.height != kImageSize)
        throw LoadError(file.string() + ": expected 64x64 image, got " + std::to_string(img.width) +
                        "x" + std::to_string(img.height));
      ImageSample s;
      s.pixels = std::move(img);
      s.source = source;
      s.y = source == kRealSource ? Authenticity::real : Authenticity::fake;
      const std::string rel = source + "/" + file.filename().string();
      if (auto it = manifest.find(rel); it != manifest.end()) {
        s.id = it->second.id;
        s.artifact_box = it->second.box;
      } else {
        s.id = next_id;
      }
      if (!ids.insert(s.id).second) throw LoadError(file.string() + ": duplicate sample id");
      next_id = std::max(next_id, s.id + 1);
      data.push_back(std::move(s));
    }
  }
  return data;
}

std::vector<std::string> fake_sources(const Dataset& dataset) {
  std::vector<std::string> sources;
  for (const auto& s : dataset)
    if (s.y == Authenticity::fake && std::find(sources.begin(), sources.end(), s.source) == sources.end())
      sources.push_back(s.source);
  return sources;
}

std::vector<PairItem> sample_pairs(const Dataset& dataset, std::size_t n_pairs, std::uint64_t seed) {
  std::vector<std::uint64_t> fakes, reals;
  for (const auto& s : dataset) (s.y == Authenticity::fake ? fakes : reals).push_back(s.id);
  if (fakes.size() < 2 || reals.size() < 2)
    throw SamplingError("sample_pairs: need at least two fake and two real samples (have " +
                        std::to_string(fakes.size()) + " fake, " + std::to_string(reals.size()) +
                        " real)");

  std::mt19937_64 rng(derive_seed(seed, kStreamPairs));
  auto pick = [&](const std::vector<std::uint64_t>& pool) {
    return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
  };
  auto pick_two = [&](const std::vector<std::uint64_t>& pool) {
    const std::size_t n = pool.size();
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    std::size_t j = std::uniform_int_distribution<std::size_t>(0, n - 2)(rng);
    if (j >= i) ++j;
    return std::pair{pool[i], pool[j]};
  };
  // Same-class pairs are uniform over all unordered same-class pairs, so the
  // class is chosen in proportion to its pair count.
  const double fake_pairs = 0.5 * static_cast<double>(fakes.size()) * static_cast<double>(fakes.size() - 1);
  const double real_pairs = 0.5 * static_cast<double>(reals.size()) * static_cast<double>(reals.size() - 1);
  std::bernoulli_distribution choose_fake(fake_pairs / (fake_pairs + real_pairs));
  std::bernoulli_distribution coin(0.5);

  std::vector<PairItem> pairs;
  pairs.reserve(n_pairs);
  const std::size_t n_same = (n_pairs + 1) / 2;
  for (std::size_t i = 0; i < n_same; ++i) {
    auto [a, b] = pick_two(choose_fake(rng) ? fakes : reals);
    pairs.push_back(PairItem{a, b, PairLabel{1}});
  }
  for (std::size_t i = n_same; i < n_pairs; ++i) {
    std::uint64_t a = pick(fakes), b = pick(reals);
    if (coin(rng)) std::swap(a, b);
    pairs.push_back(PairItem{a, b, PairLabel{0}});
  }
  std::shuffle(pairs.begin(), pairs.end(), rng);
  return pairs;
}

template <typename T>
Tensor<T> batch_tensor(const Dataset& dataset, std::span<const std::size_t> indices) {
  std::vector<const Image*> images;
  images.reserve(indices.size());
  for (std::size_t i : indices) images.push_back(&dataset.at(i).pixels);
  return stack_images<T>(images);
}

template Tensor<float> batch_tensor<float>(const Dataset&, std::span<const std::size_t>);
template Tensor<double> batch_tensor<double>(const Dataset&, std::span<const std::size_t>);

}  // namespace deepfd
