#include <doctest.h>

#include <cmath>

#include "deepfd/trainer.hpp"
#include "temp_dir.hpp"

using namespace deepfd;

namespace {

Dataset tiny_set(std::uint64_t seed = 1) {
  SynthConfig sc;
  sc.n_real = 6;
  sc.n_fake_per_source = 2;
  sc.seed = seed;
  return synth_generate(sc);
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.phase1_epochs = 1;
  cfg.batch_size = 4;
  cfg.pairs_per_epoch = 8;
  cfg.seed = 11;
  return cfg;
}

// Flat dark images labelled real, flat bright images labelled fake.
Dataset separable_set() {
  Dataset data;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(0.0, 4.0);
  for (std::uint64_t i = 0; i < 16; ++i) {
    const bool fake = i % 2 == 1;
    Image img(64, 64);
    for (auto& v : img.rgb) v = static_cast<std::uint8_t>(std::clamp((fake ? 170.0 : 80.0) + noise(rng), 0.0, 255.0));
    data.push_back(ImageSample{img, fake ? Authenticity::fake : Authenticity::real, fake ? "fake_flat" : "real", i, {}});
  }
  return data;
}

std::uint64_t hash_params(const ModelParams<float>& params, bool (*select)(std::string_view)) {
  std::uint64_t h = fnv1a("", 0);
  for (const auto& e : params.entries())
    if (select(e.name)) h = fnv1a(e.tensor.storage().data(), e.tensor.size() * sizeof(float), h);
  return h;
}

}  // namespace

TEST_CASE("config text form") {
  const auto cfg = parse_config("# schedule\nlr = 0.0005\nepochs = 4  # short\nphase1_epochs=1\n\npairs_per_epoch = 64\nuse_contrastive = off\n");
  CHECK(cfg.lr == 0.0005);
  CHECK(cfg.epochs == 4);
  CHECK(cfg.phase1_epochs == 1);
  CHECK(cfg.pairs_per_epoch == 64u);
  CHECK_FALSE(cfg.use_contrastive);
  CHECK(cfg.batch_size == 32);
  CHECK(parse_config(format_config(cfg)) == cfg);
  CHECK(parse_config("pairs_per_epoch = auto").pairs_for(50) == 500);

  CHECK_THROWS_WITH_AS(parse_config("lr = 1\nbogus = 3\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = -1"), ConfigError);
  CHECK_THROWS_AS(parse_config("epochs = 2\nphase1_epochs = 3"), ConfigError);
  CHECK_THROWS_AS(parse_config("margin = 0"), ConfigError);
  CHECK_THROWS_AS(parse_config("batch_size = 0"), ConfigError);

  const auto ab = ablation_of(TrainConfig{});
  CHECK(ab.contrastive_epochs() == 0);
  CHECK(ab.classifier_epochs() == 15);
  CHECK(TrainConfig{}.classifier_epochs() == 13);
  CHECK(config_hash(ab) != config_hash(TrainConfig{}));
}

TEST_CASE("checkpoint round trip and corruption checks") {
  TempDir dir("ckpt");
  const auto ckpt = train(tiny_set(), tiny_config());
  const auto path = dir.path / "model.dfd";
  save_checkpoint(ckpt, path);
  const auto back = load_checkpoint(path);
  CHECK(back.params == ckpt.params);
  CHECK(back.adam.first_moment == ckpt.adam.first_moment);
  CHECK(back.adam.second_moment == ckpt.adam.second_moment);
  CHECK(back.adam.step == ckpt.adam.step);
  CHECK(back.epoch == ckpt.epoch);
  CHECK(back.config == ckpt.config);
  CHECK(back.phase1_losses == ckpt.phase1_losses);
  CHECK(back.phase2_losses == ckpt.phase2_losses);
  CHECK(serialize_checkpoint(back) == serialize_checkpoint(ckpt));

  const auto bytes = serialize_checkpoint(ckpt);
  auto check_fails = [&](std::vector<std::uint8_t> b, const std::string& which) {
    try {
      deserialize_checkpoint(b);
      FAIL("accepted a corrupted checkpoint");
    } catch (const CorruptionError& e) {
      CHECK(e.check() == which);
    }
  };
  SUBCASE("flipped payload byte") {
    for (std::size_t at : {std::size_t{8}, bytes.size() / 2, bytes.size() - 5}) {
      auto b = bytes;
      b[at] ^= 0x40;
      check_fails(b, "crc");
    }
  }
  SUBCASE("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    check_fails(b, "magic");
  }
  SUBCASE("future version") {
    auto b = bytes;
    b[4] = 2;
    check_fails(b, "version");
  }
  SUBCASE("truncated") {
    check_fails(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 6), "truncated");
    check_fails(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 100), "crc");
  }
  CHECK_THROWS_AS(load_checkpoint(dir.path / "absent.dfd"), LoadError);
}

TEST_CASE("training is deterministic") {
  const auto data = tiny_set();
  const auto a = train(data, tiny_config()), b = train(data, tiny_config());
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  CHECK(a.phase1_losses.size() == 2);
  CHECK(a.phase2_losses.size() == 2 * 3);
  CHECK(a.adam.step == 2 + 6);

  auto other = tiny_config();
  other.seed = 12;
  CHECK_FALSE(train(data, other).params == a.params);
}

TEST_CASE("phase 1 never touches the classifier head") {
  const auto data = tiny_set();
  auto cfg = tiny_config();
  cfg.phase1_epochs = 2;
  auto params = init_params<float>(3);
  const auto before_d2 = hash_params(params, is_d2_param);
  const auto before_d1 = hash_params(params, is_d1_param);
  const auto losses = train_phase1(data, cfg, params);
  CHECK(losses.size() == 4);
  CHECK(hash_params(params, is_d2_param) == before_d2);
  CHECK(hash_params(params, is_d1_param) != before_d1);
  for (float l : losses) CHECK(std::isfinite(l));
}

TEST_CASE("empty schedules leave parameters unchanged") {
  const auto data = tiny_set();
  auto cfg = tiny_config();
  cfg.phase1_epochs = 0;
  auto params = init_params<float>(3);
  const auto copy = params;
  CHECK(train_phase1(data, cfg, params).empty());
  CHECK(params == copy);

  cfg.epochs = 2;
  cfg.phase1_epochs = 2;
  CHECK(train_phase2(data, cfg, params).empty());
  CHECK(params == copy);
}

TEST_CASE("ablation schedule differs from the default") {
  const auto data = tiny_set();
  const auto with = train(data, tiny_config());
  const auto without = train(data, ablation_of(tiny_config()));
  CHECK(without.phase1_losses.empty());
  CHECK(without.phase2_losses.size() == 3 * 3);
  CHECK_FALSE(with.params == without.params);
}

TEST_CASE("resume reproduces an uninterrupted run") {
  const auto data = tiny_set();
  auto cfg = tiny_config();
  cfg.epochs = 4;
  TempDir dir("resume");
  std::optional<Checkpoint> mid;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](const Checkpoint& c) {
    if (c.epoch == 2) {
      save_checkpoint(c, dir.path / "mid.dfd");
      mid = c;
    }
  };
  const auto full = train(data, cfg, hooks);
  REQUIRE(mid.has_value());
  const auto resumed = resume(data, load_checkpoint(dir.path / "mid.dfd"));
  CHECK(resumed.params == full.params);
  CHECK(serialize_checkpoint(resumed) == serialize_checkpoint(full));
}

TEST_CASE("iteration hook sees every step") {
  const auto data = tiny_set();
  std::vector<int> phases;
  std::vector<std::size_t> iters;
  TrainHooks hooks;
  hooks.on_iteration = [&](int phase, std::size_t it, double loss) {
    phases.push_back(phase);
    iters.push_back(it);
    CHECK(std::isfinite(loss));
  };
  const auto ckpt = train(data, tiny_config(), hooks);
  REQUIRE(iters.size() == ckpt.phase1_losses.size() + ckpt.phase2_losses.size());
  for (std::size_t i = 0; i < iters.size(); ++i) CHECK(iters[i] == i);
  CHECK(phases.front() == 1);
  CHECK(phases.back() == 2);
}

TEST_CASE("classifier training fits a separable toy set") {
  const auto data = separable_set();
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.phase1_epochs = 0;
  cfg.batch_size = 8;
  cfg.seed = 2;
  auto params = init_params<float>(2);
  const auto losses = train_phase2(data, cfg, params);
  REQUIRE(losses.size() == 24);
  const double last = (losses[22] + losses[23]) / 2.0;
  CHECK(last < 0.1);
}

TEST_CASE("embedding separation statistics") {
  const auto data = tiny_set();
  const auto params = init_params<float>(1);
  const auto s = embedding_separation(data, params);
  CHECK(s.intra > 0.0);
  CHECK(s.inter > 0.0);
  const auto emb = embed_all(data, params, 3);
  CHECK(emb.dims() == Dims{data.size(), 128});
}

TEST_CASE("pair sampling needs both classes") {
  auto data = tiny_set();
  data.resize(6);  // reals only
  CHECK_THROWS_AS(train(data, tiny_config()), SamplingError);
}
