#include <doctest.h>

#include <random>
#include <set>

#include "deepfd/evaluation.hpp"

using namespace deepfd;

namespace {

std::vector<Authenticity> repeat(Authenticity a, std::size_t n) { return std::vector<Authenticity>(n, a); }

Dataset desk_set() {
  SynthConfig cfg;
  cfg.seed = 2;
  return synth_generate(cfg);
}

}  // namespace

TEST_CASE("metrics on perfect and degenerate predictions") {
  std::vector<Authenticity> labels{Authenticity::fake, Authenticity::real, Authenticity::fake};
  auto r = compute_metrics(labels, labels);
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.accuracy == 1.0);

  // Nothing predicted fake: precision is 0 by convention.
  r = compute_metrics(repeat(Authenticity::real, 3), labels);
  CHECK(r.counts == ConfusionCounts{0, 0, 1, 2});
  CHECK(r.precision == 0.0);
  CHECK(r.recall == 0.0);

  // No fakes at all.
  r = compute_metrics(repeat(Authenticity::real, 2), repeat(Authenticity::real, 2));
  CHECK(r.recall == 0.0);
  CHECK(r.accuracy == 1.0);

  r = compute_metrics(std::vector<Authenticity>{}, std::vector<Authenticity>{});
  CHECK(r.accuracy == 0.0);

  CHECK_THROWS_AS(compute_metrics(repeat(Authenticity::real, 2), labels), ArgumentError);
}

TEST_CASE("table-scale confusion counts") {
  const auto r = metrics_from_counts(ConfusionCounts{947, 53, 0, 80});
  CHECK(r.precision == doctest::Approx(0.947).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(947.0 / 1027.0).epsilon(1e-12));
  CHECK(r.recall == doctest::Approx(0.9221).epsilon(1e-4));
}

TEST_CASE("metric identities over random confusion tables") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(0, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    ConfusionCounts c{static_cast<std::size_t>(count(rng)), static_cast<std::size_t>(count(rng)),
                      static_cast<std::size_t>(count(rng)), static_cast<std::size_t>(count(rng))};
    if (trial % 10 == 0) c.tp = 0;
    if (trial % 15 == 0) c.fp = 0;
    std::vector<Authenticity> pred, truth;
    auto push = [&](std::size_t n, Authenticity p, Authenticity t) {
      for (std::size_t i = 0; i < n; ++i) {
        pred.push_back(p);
        truth.push_back(t);
      }
    };
    push(c.tp, Authenticity::fake, Authenticity::fake);
    push(c.fp, Authenticity::fake, Authenticity::real);
    push(c.tn, Authenticity::real, Authenticity::real);
    push(c.fn, Authenticity::real, Authenticity::fake);
    std::shuffle(pred.begin(), pred.end(), std::mt19937_64(trial));
    std::shuffle(truth.begin(), truth.end(), std::mt19937_64(trial));
    const auto r = compute_metrics(pred, truth);
    CHECK(r.counts == c);
    CHECK(r.counts.total() == pred.size());
    const double p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    const double rc = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    const double a = c.total() ? double(c.tp + c.tn) / double(c.total()) : 0.0;
    CHECK(r.precision == p);
    CHECK(r.recall == rc);
    CHECK(r.accuracy == a);
    CHECK(r.precision >= 0.0);
    CHECK(r.precision <= 1.0);
    CHECK(r.recall <= 1.0);
  }
}

TEST_CASE("leave-one-source-out split") {
  const auto data = desk_set();
  const auto split = split_leave_one_out(data, "fake_blocky_upsample", 0.2, 7);
  std::size_t test_fakes = 0, test_reals = 0, train_fakes = 0, train_reals = 0;
  for (const auto& s : split.test) {
    (s.y == Authenticity::fake ? test_fakes : test_reals)++;
    if (s.y == Authenticity::fake) CHECK(s.source == "fake_blocky_upsample");
  }
  for (const auto& s : split.train) {
    (s.y == Authenticity::fake ? train_fakes : train_reals)++;
    CHECK(s.source != "fake_blocky_upsample");
  }
  CHECK(test_fakes == 100);
  CHECK(test_reals == 60);
  CHECK(train_fakes == 200);
  CHECK(train_reals == 240);

  std::set<std::uint64_t> train_ids;
  for (const auto& s : split.train) train_ids.insert(s.id);
  for (const auto& s : split.test) CHECK(train_ids.count(s.id) == 0);

  const auto again = split_leave_one_out(data, "fake_blocky_upsample", 0.2, 7);
  CHECK(split_hash(again) == split_hash(split));
  CHECK(split_hash(split_leave_one_out(data, "fake_blocky_upsample", 0.2, 8)) != split_hash(split));
  CHECK_THROWS_AS(split_leave_one_out(data, "fake_gan", 0.2, 7), ArgumentError);
  CHECK_THROWS_AS(split_leave_one_out(data, "real", 0.2, 7), ArgumentError);
}

TEST_CASE("random split is stratified") {
  const auto data = desk_set();
  const auto split = split_random(data, 0.2, 3);
  CHECK(split.test.size() == 120);
  CHECK(split.train.size() == 480);
  std::size_t test_reals = 0;
  for (const auto& s : split.test) test_reals += s.y == Authenticity::real;
  CHECK(test_reals == 60);
}

TEST_CASE("report TSV round trip") {
  EvalReport a = metrics_from_counts(ConfusionCounts{10, 2, 30, 5});
  a.held_out_source = "fake_color_banding";
  a.seed = 4;
  EvalReport b = metrics_from_counts(ConfusionCounts{0, 0, 5, 5});
  b.held_out_source = "fake_color_banding";
  b.variant = kVariantAblation;
  b.seed = 4;
  const std::vector<EvalReport> reports{a, b};
  const std::string text = format_report_tsv(reports);
  CHECK(text.rfind("held_out\tvariant\ttp\tfp\ttn\tfn\tprecision\trecall\taccuracy\tseed\n", 0) == 0);
  CHECK(text.find("\r") == std::string::npos);
  CHECK(text.find("0.8333") != std::string::npos);
  const auto parsed = parse_report_tsv(text);
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].held_out_source == a.held_out_source);
  CHECK(parsed[1].variant == kVariantAblation);
  CHECK(parsed[0].counts == a.counts);
  CHECK(parsed[0].seed == 4);
  CHECK(format_report_tsv(parsed) == text);

  CHECK_THROWS_AS(parse_report_tsv("held_out\tvariant\n x"), LoadError);
  CHECK_THROWS_AS(parse_report_tsv(text + "fake_x\tdeepfd\t1\t2\n"), LoadError);
}

TEST_CASE("leave-one-source-out benchmark structure") {
  SynthConfig sc;
  sc.n_real = 6;
  sc.n_fake_per_source = 3;
  sc.seed = 1;
  const auto data = synth_generate(sc);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.phase1_epochs = 1;
  cfg.pairs_per_epoch = 4;
  cfg.batch_size = 8;
  cfg.seed = 5;
  const auto sources = fake_sources(data);
  LosoOptions options;
  options.ablation = true;
  std::vector<std::string> visited;
  options.on_cell = [&](const std::string& s, const std::string& v) { visited.push_back(s + "/" + v); };
  const auto reports = run_loso_benchmark(data, cfg, sources, options);
  REQUIRE(reports.size() == 6);
  CHECK(visited.size() == 6);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto& c = reports[2 * i];
    const auto& ab = reports[2 * i + 1];
    CHECK(c.held_out_source == sources[i]);
    CHECK(c.variant == kVariantContrastive);
    CHECK(ab.variant == kVariantAblation);
    CHECK(c.seed == ab.seed);
    CHECK(c.split_hash == ab.split_hash);
    CHECK(c.config_hash != ab.config_hash);
    CHECK(c.counts.total() == 3 + 1);
  }

  options.ablation = false;
  options.jobs = 2;
  const auto parallel = run_loso_benchmark(data, cfg, sources, options);
  REQUIRE(parallel.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(parallel[i].counts == reports[2 * i].counts);
}
