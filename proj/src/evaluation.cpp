#include "deepfd/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <future>
#include <numeric>
#include <set>
#include <sstream>

#include "deepfd/random.hpp"
#include "deepfd/trainer.hpp"

namespace deepfd {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Chooses `count` of `indices` with a seeded shuffle; returns a membership mask
// over the dataset.
void mark_random(std::vector<std::size_t> indices, std::size_t count, std::uint64_t seed,
                 std::vector<bool>& mask) {
  std::mt19937_64 rng(seed);
  std::shuffle(indices.begin(), indices.end(), rng);
  for (std::size_t i = 0; i < count && i < indices.size(); ++i) mask[indices[i]] = true;
}

Split partition(const Dataset& dataset, const std::vector<bool>& in_test) {
  Split s;
  for (std::size_t i = 0; i < dataset.size(); ++i) (in_test[i] ? s.test : s.train).push_back(dataset[i]);
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

template <typename Number>
Number parse_field(const std::string& text) {
  Number v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw LoadError("report: invalid field '" + text + "'");
  return v;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

const char* kReportHeader = "held_out\tvariant\ttp\tfp\ttn\tfn\tprecision\trecall\taccuracy\tseed";

}  // namespace

EvalReport metrics_from_counts(const ConfusionCounts& c) {
  EvalReport r;
  r.counts = c;
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.accuracy = ratio(c.tp + c.tn, c.total());
  return r;
}

EvalReport compute_metrics(std::span<const Authenticity> predictions, std::span<const Authenticity> labels) {
  if (predictions.size() != labels.size())
    throw ArgumentError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(labels.size()) + " labels");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted_fake = predictions[i] == Authenticity::fake;
    const bool is_fake = labels[i] == Authenticity::fake;
    if (predicted_fake && is_fake) ++c.tp;
    else if (predicted_fake) ++c.fp;
    else if (is_fake) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_counts(c);
}

Split split_leave_one_out(const Dataset& dataset, const std::string& held_out_source,
                          double test_fraction_real, std::uint64_t seed) {
  const auto sources = fake_sources(dataset);
  if (std::find(sources.begin(), sources.end(), held_out_source) == sources.end())
    throw ArgumentError("unknown fake source '" + held_out_source + "'");
  if (!(test_fraction_real >= 0.0 && test_fraction_real <= 1.0))
    throw ArgumentError("test_fraction_real must be in [0, 1]");
  std::vector<bool> in_test(dataset.size(), false);
  std::vector<std::size_t> reals;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].source == held_out_source) in_test[i] = true;
    if (dataset[i].y == Authenticity::real) reals.push_back(i);
  }
  const std::size_t n_test_reals = rounded_count(test_fraction_real, reals.size());
  mark_random(std::move(reals), n_test_reals, derive_seed(seed, kStreamSplit), in_test);
  return partition(dataset, in_test);
}

Split split_random(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw ArgumentError("test_fraction must be in [0, 1]");
  std::vector<std::string> sources{kRealSource};
  for (auto& s : fake_sources(dataset)) sources.push_back(s);
  std::vector<bool> in_test(dataset.size(), false);
  for (std::size_t k = 0; k < sources.size(); ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i)
      if (dataset[i].source == sources[k]) members.push_back(i);
    const std::size_t count = rounded_count(test_fraction, members.size());
    mark_random(std::move(members), count, derive_seed(seed, kStreamSplit, k + 1), in_test);
  }
  return partition(dataset, in_test);
}

std::uint64_t split_hash(const Split& split) {
  std::set<std::uint64_t> train_ids, test_ids;
  for (const auto& s : split.train) train_ids.insert(s.id);
  for (const auto& s : split.test) test_ids.insert(s.id);
  std::uint64_t h = fnv1a("train", 5);
  for (auto id : train_ids) h = fnv1a(&id, sizeof(id), h);
  h = fnv1a("test", 4, h);
  for (auto id : test_ids) h = fnv1a(&id, sizeof(id), h);
  return h;
}

std::vector<Authenticity> predict(const Dataset& dataset, const ModelParams<float>& params,
                                  std::size_t batch_size) {
  std::vector<Authenticity> out;
  out.reserve(dataset.size());
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    std::vector<std::size_t> indices(end - start);
    std::iota(indices.begin(), indices.end(), start);
    for (const auto& d : detect_batch(batch_tensor<float>(dataset, indices), params)) out.push_back(d.label);
  }
  return out;
}

EvalReport evaluate(const Dataset& test, const ModelParams<float>& params) {
  std::vector<Authenticity> labels;
  labels.reserve(test.size());
  for (const auto& s : test) labels.push_back(s.y);
  return compute_metrics(predict(test, params), labels);
}

std::vector<EvalReport> run_loso_benchmark(const Dataset& dataset, const TrainConfig& cfg,
                                           const std::vector<std::string>& held_out_sources,
                                           const LosoOptions& options) {
  cfg.validate();
  const auto sources = fake_sources(dataset);
  if (sources.size() < 2) throw ArgumentError("leave-one-source-out needs at least two fake sources");

  struct Cell {
    std::string held_out;
    std::string variant;
    TrainConfig cfg;
    std::size_t split_index;
  };
  std::vector<Split> splits;
  std::vector<Cell> cells;
  for (const auto& source : held_out_sources) {
    splits.push_back(split_leave_one_out(dataset, source, cfg.test_fraction_real, cfg.seed));
    cells.push_back({source, kVariantContrastive, cfg, splits.size() - 1});
    if (options.ablation) cells.push_back({source, kVariantAblation, ablation_of(cfg), splits.size() - 1});
  }

  auto run_cell = [&](const Cell& cell) {
    if (options.on_cell) options.on_cell(cell.held_out, cell.variant);
    const Split& split = splits[cell.split_index];
    const Checkpoint ckpt = train(split.train, cell.cfg);
    EvalReport r = evaluate(split.test, ckpt.params);
    r.held_out_source = cell.held_out;
    r.variant = cell.variant;
    r.seed = cell.cfg.seed;
    r.config_hash = config_hash(cell.cfg);
    r.split_hash = split_hash(split);
    return r;
  };

  std::vector<EvalReport> reports(cells.size());
  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) reports[i] = run_cell(cells[i]);
    return reports;
  }
  // Cells are independent and fully seeded, so completion order does not
  // affect any result.
  for (std::size_t start = 0; start < cells.size(); start += jobs) {
    std::vector<std::future<EvalReport>> running;
    const std::size_t end = std::min(cells.size(), start + jobs);
    for (std::size_t i = start; i < end; ++i)
      running.push_back(std::async(std::launch::async, run_cell, std::cref(cells[i])));
    for (std::size_t i = start; i < end; ++i) reports[i] = running[i - start].get();
  }
  return reports;
}

std::string format_report_tsv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& r : reports)
    os << r.held_out_source << '\t' << r.variant << '\t' << r.counts.tp << '\t' << r.counts.fp << '\t'
       << r.counts.tn << '\t' << r.counts.fn << '\t' << fixed4(r.precision) << '\t' << fixed4(r.recall)
       << '\t' << fixed4(r.accuracy) << '\t' << r.seed << '\n';
  return os.str();
}

std::vector<EvalReport> parse_report_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader) throw LoadError("report: missing or wrong header");
  std::vector<EvalReport> reports;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 10) throw LoadError("report: expected 10 fields in '" + line + "'");
    EvalReport r;
    r.held_out_source = f[0];
    r.variant = f[1];
    r.counts = {parse_field<std::size_t>(f[2]), parse_field<std::size_t>(f[3]),
                parse_field<std::size_t>(f[4]), parse_field<std::size_t>(f[5])};
    r.precision = parse_field<double>(f[6]);
    r.recall = parse_field<double>(f[7]);
    r.accuracy = parse_field<double>(f[8]);
    r.seed = parse_field<std::uint64_t>(f[9]);
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace deepfd
