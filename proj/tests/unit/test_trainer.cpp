#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "cot3d/errors.hpp"
#include "cot3d/io.hpp"
#include "cot3d/trainer.hpp"
#include "doctest.h"

using namespace cot3d;
namespace fs = std::filesystem;

namespace {

Tensor vec(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

ModelConfig tiny_model() {
  ModelConfig m;
  m.keypoints = 8;
  m.neighbors = 4;
  m.local_dim = 8;
  m.global_dim = 12;
  m.token_dim = 8;
  m.embed_dim = 6;
  m.max_len = 64;
  return m;
}

const std::vector<DatasetRecord>& tiny_dataset() {
  static const std::vector<DatasetRecord> recs = [] {
    DatasetConfig dc;
    dc.n_per_subset = 10;
    dc.points_per_shape = 48;
    dc.seed = 5;
    return split_dataset(build_dataset(dc), kDefaultRatios, 5);
  }();
  return recs;
}

TrainConfig tiny_stage1() {
  TrainConfig c = default_train_config(1);
  c.model = tiny_model();
  c.batch_size = 4;
  c.epochs = 2;
  c.seed = 3;
  c.annotation_condition = AnnotationFormat::kNone;
  return c;
}

std::map<std::string, Tensor> snapshot(Model& m) {
  std::map<std::string, Tensor> out;
  for (ParamBlock* p : m.params()) out.emplace(p->name, p->value);
  return out;
}

}  // namespace

TEST_CASE("default configs follow the table") {
  const TrainConfig s1 = default_train_config(1);
  CHECK(s1.learning_rate == 2e-3);
  CHECK(s1.batch_size == 256);
  CHECK(s1.epochs == 1);
  CHECK(s1.warmup_ratio == 0.03);
  CHECK(s1.grad_clip == 1.0);
  CHECK(s1.unfreeze_policy == UnfreezePolicy::kNone);
  const TrainConfig s2 = default_train_config(2);
  CHECK(s2.learning_rate == 2e-5);
  CHECK(s2.batch_size == 128);
  CHECK(s2.unfreeze_policy == UnfreezePolicy::kAll);
  CHECK(default_train_config(2, ModelPreset::kLlmLike).unfreeze_policy == UnfreezePolicy::kTopBlock);
  TrainConfig bad = s1;
  bad.unfreeze_policy = UnfreezePolicy::kAll;
  CHECK_THROWS_AS(validate_train_config(bad), ConfigError);
}

TEST_CASE("config text round trip and overrides") {
  TrainConfig c = default_train_config(1);
  CHECK(config_overrides(c).empty());
  c.epochs = 50;
  c.batch_size = 32;
  c.mixture = FormatMix{0.5, 0.0, 0.5};
  c.model.embed_dim = 16;
  const std::string text = train_config_to_text(c);
  CHECK(text.find("overrides=batch_size,epochs,mixture,model.embed_dim\n") != std::string::npos);
  CHECK(parse_train_config(text) == c);

  const TrainConfig s2 = parse_train_config("# stage two\nstage = 2\nmodel_preset=llm_like\nepochs=3\n");
  CHECK(s2.learning_rate == 2e-5);
  CHECK(s2.unfreeze_policy == UnfreezePolicy::kTopBlock);
  CHECK(s2.epochs == 3);
  CHECK(config_overrides(s2) == std::vector<std::string>{"epochs"});
  CHECK_THROWS_AS(parse_train_config("lerning_rate=1"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("epochs=many"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("justakey"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("mixture=1,0"), ConfigError);
}

TEST_CASE("lr_at schedule") {
  const TrainConfig s1 = default_train_config(1);
  const long total = 1000;
  const long warm = 30;  // ceil(0.03 * 1000)
  CHECK(lr_at(0, total, s1) == 0.0);
  CHECK(lr_at(warm, total, s1) == 2e-3);
  CHECK(lr_at(warm / 2, total, s1) == doctest::Approx(1e-3));
  CHECK(std::abs(lr_at(total, total, s1)) <= 1e-12);
  CHECK(lr_at(warm + 1, total, s1) < 2e-3);
  CHECK(std::abs(lr_at(warm + 1, total, s1) - 2e-3) < 1e-7);
  // Cosine midpoint.
  CHECK(lr_at(warm + (total - warm) / 2, total, s1) == doctest::Approx(1e-3).epsilon(1e-12));
  const TrainConfig s2 = default_train_config(2);
  CHECK(lr_at(warm, total, s2) == 2e-5);
  // 0.03 * 100 must give 3 warm-up steps, not 4.
  CHECK(lr_at(3, 100, s1) == 2e-3);
  for (long t = 1; t <= total; ++t) CHECK(lr_at(t, total, s1) <= 2e-3);
  CHECK_THROWS_AS(lr_at(-1, total, s1), RangeError);
  CHECK_THROWS_AS(lr_at(total + 1, total, s1), RangeError);
  CHECK_THROWS_AS(lr_at(0, 0, s1), RangeError);
  CHECK(lr_at(1, 1, s1) == 2e-3);
}

TEST_CASE("clip_global_norm") {
  ParamBlock p("p", vec({0.0, 0.0}));
  p.grad = vec({2.0, 0.0});
  CHECK(clip_global_norm({&p}, 1.0) == 2.0);
  CHECK(p.grad == vec({1.0, 0.0}));
  p.grad = vec({0.3, 0.4});
  clip_global_norm({&p}, 1.0);
  CHECK(p.grad == vec({0.3, 0.4}));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> N(0, 5);
  for (int trial = 0; trial < 200; ++trial) {
    ParamBlock a("a", Tensor::matrix(3, 4)), b("b", Tensor::vector(7));
    for (double& g : a.grad.data()) g = N(rng);
    for (double& g : b.grad.data()) g = N(rng);
    clip_global_norm({&a, &b}, 1.0);
    double sq = 0;
    for (double g : a.grad.data()) sq += g * g;
    for (double g : b.grad.data()) sq += g * g;
    CHECK(std::sqrt(sq) <= 1.0 + 1e-12);
  }

  p.grad.data()[0] = NAN;
  CHECK_THROWS_AS(clip_global_norm({&p}, 1.0, 17), TrainingDivergence);
  try {
    clip_global_norm({&p}, 1.0, 17);
  } catch (const TrainingDivergence& e) {
    CHECK(e.step() == 17);
  }
  CHECK_THROWS_AS(clip_global_norm({&p}, 0.0), RangeError);
}

TEST_CASE("adamw reference updates") {
  ParamBlock p("w", vec({1.0}));
  p.grad = vec({1.0});
  AdamState st;
  adamw_step({&p}, st, 0.1, {0.9, 0.999, 1e-8, 0.0});
  CHECK(p.value.data()[0] == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(st.t == 1);

  ParamBlock q("q", vec({2.0, -3.0}));
  AdamState st2;
  adamw_step({&q}, st2, 0.1, {0.9, 0.999, 1e-8, 0.01});
  CHECK(q.value.data()[0] == doctest::Approx(2.0 * (1 - 0.1 * 0.01)).epsilon(1e-15));
  CHECK(q.value.data()[1] == doctest::Approx(-3.0 * (1 - 0.1 * 0.01)).epsilon(1e-15));

  ParamBlock tau("temperature.log_tau", vec({-2.0}));
  AdamState st3;
  adamw_step({&tau}, st3, 0.1, {0.9, 0.999, 1e-8, 0.5}, {"temperature.log_tau"});
  CHECK(tau.value.data()[0] == -2.0);

  ParamBlock frozen("f", vec({0.1234, 5.0}));
  frozen.trainable = false;
  frozen.grad = vec({1.0, -1.0});
  const Tensor before = frozen.value;
  AdamState st4;
  adamw_step({&frozen}, st4, 0.1, {});
  CHECK(frozen.value == before);
  CHECK(st4.moments.empty());

  // Second step, hand-evaluated: m = 0.19, v = 0.001999, bias-corrected.
  ParamBlock r("r", vec({0.0}));
  AdamState st5;
  r.grad = vec({1.0});
  adamw_step({&r}, st5, 0.01, {0.9, 0.999, 1e-8, 0.0});
  const double after1 = r.value.data()[0];
  adamw_step({&r}, st5, 0.01, {0.9, 0.999, 1e-8, 0.0});
  const double mhat = 0.19 / (1 - 0.81), vhat = 0.001999 / (1 - 0.998001);
  CHECK(r.value.data()[0] == doctest::Approx(after1 - 0.01 * mhat / (std::sqrt(vhat) + 1e-8)));
}

TEST_CASE("stage 1 trains the shape side only and is deterministic") {
  const auto& recs = tiny_dataset();
  const TrainConfig cfg = tiny_stage1();
  Model init = Model::create(cfg.model, build_training_vocab(select_split(recs, Split::kTrain), 1),
                             cfg.seed);
  const auto before = snapshot(init);

  Checkpoint a = train_stage1(cfg, recs);
  const auto after = snapshot(a.model);
  for (ParamBlock* p : a.model.text_params()) {
    CHECK(after.at(p->name) == before.at(p->name));
    CHECK_FALSE(p->trainable);
  }
  for (ParamBlock* p : a.model.shape_side_params()) {
    CHECK_MESSAGE(!(after.at(p->name) == before.at(p->name)), p->name);
  }
  CHECK(a.step == 2 * 4);  // 16 train records, batch 4, 2 epochs
  CHECK(a.epoch_losses.size() == 2);

  Checkpoint b = train_stage1(cfg, recs);
  CHECK(checkpoint_to_string(a) == checkpoint_to_string(b));

  TrainConfig other = cfg;
  other.seed = 4;
  CHECK(checkpoint_to_string(train_stage1(other, recs)) != checkpoint_to_string(a));

  TrainConfig wrong = cfg;
  wrong.stage = 2;
  CHECK_THROWS_AS(train_stage1(wrong, recs), ConfigError);
  std::vector<DatasetRecord> no_train = select_split(recs, Split::kTest);
  CHECK_THROWS_AS(train_stage1(cfg, no_train), DataError);
}

TEST_CASE("stage 2 freezing follows the policy") {
  const auto& recs = tiny_dataset();
  const Checkpoint s1 = train_stage1(tiny_stage1(), recs);
  Checkpoint base = s1;
  const auto before = snapshot(base.model);

  TrainConfig cfg = default_train_config(2);
  cfg.batch_size = 4;
  cfg.epochs = 1;
  cfg.learning_rate = 1e-3;
  cfg.annotation_condition = AnnotationFormat::kNone;

  SUBCASE("all") {
    cfg.unfreeze_policy = UnfreezePolicy::kAll;
    Checkpoint c = train_stage2(cfg, s1, recs);
    const auto after = snapshot(c.model);
    for (ParamBlock* p : c.model.params()) CHECK_MESSAGE(!(after.at(p->name) == before.at(p->name)), p->name);
    CHECK(c.step == s1.step + 4);
  }
  SUBCASE("top_block") {
    cfg.unfreeze_policy = UnfreezePolicy::kTopBlock;
    Checkpoint c = train_stage2(cfg, s1, recs);
    const auto after = snapshot(c.model);
    std::set<std::string> top;
    for (ParamBlock* p : c.model.text.top_block_params()) top.insert(p->name);
    CHECK_FALSE(top.empty());
    for (ParamBlock* p : c.model.text_params()) {
      CHECK_MESSAGE((after.at(p->name) == before.at(p->name)) == (top.count(p->name) == 0), p->name);
    }
  }
  SUBCASE("none") {
    cfg.unfreeze_policy = UnfreezePolicy::kNone;
    Checkpoint c = train_stage2(cfg, s1, recs);
    const auto after = snapshot(c.model);
    for (ParamBlock* p : c.model.text_params()) CHECK(after.at(p->name) == before.at(p->name));
  }
  SUBCASE("stage mismatch") {
    cfg.stage = 1;
    CHECK_THROWS_AS(train_stage2(cfg, s1, recs), ConfigError);
  }
  SUBCASE("mixture of CoT and no-CoT texts") {
    cfg.mixture = FormatMix{0.5, 0.0, 0.5};
    const auto texts = training_texts(select_split(recs, Split::kTrain), cfg);
    std::size_t tagged = 0;
    for (const auto& t : texts) tagged += t.find("<think>") != std::string::npos;
    CHECK(tagged > 0);
    CHECK(tagged < texts.size());
    Checkpoint c = train_stage2(cfg, s1, recs);
    CHECK(std::isfinite(c.final_loss));
  }
}

TEST_CASE("full-batch first-step gradients do not depend on order") {
  const auto& recs = tiny_dataset();
  const auto train = select_split(recs, Split::kTrain);
  TrainConfig cfg = tiny_stage1();
  Model m = Model::create(cfg.model, build_training_vocab(train, 1), cfg.seed);
  const auto samples = prepare_samples(m, train, training_texts(train, cfg), 2);
  std::vector<const TrainingSample*> in_order, shuffled;
  for (const auto& s : samples) in_order.push_back(&s);
  shuffled = in_order;
  std::mt19937_64 rng(9);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);

  auto grads = [&](const std::vector<const TrainingSample*>& batch) {
    zero_grads(m.params());
    const double loss = accumulate_batch_gradients(m, batch, true);
    std::map<std::string, Tensor> g;
    for (ParamBlock* p : m.params()) g.emplace(p->name, p->grad);
    return std::make_pair(loss, g);
  };
  const auto [la, ga] = grads(in_order);
  const auto [lb, gb] = grads(shuffled);
  CHECK(la == doctest::Approx(lb).epsilon(1e-12));
  for (const auto& [name, t] : ga) {
    const auto& u = gb.at(name);
    for (std::size_t i = 0; i < t.data().size(); ++i) {
      CHECK(std::abs(t.data()[i] - u.data()[i]) <= 1e-12 * (1.0 + std::abs(t.data()[i])));
    }
  }
}

TEST_CASE("checkpoint round trip, truncation and resume") {
  const auto& recs = tiny_dataset();
  const Checkpoint a = train_stage1(tiny_stage1(), recs);
  const fs::path dir = fs::temp_directory_path() / "cot3d_test_ckpt";
  fs::remove_all(dir);
  save_checkpoint(a, dir / "a.ckpt");
  const std::string first = read_file(dir / "a.ckpt");
  CHECK(first.rfind("COT3D-CKPT v1\n", 0) == 0);
  Checkpoint b = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(b, dir / "b.ckpt");
  CHECK(read_file(dir / "b.ckpt") == first);

  Checkpoint& ma = const_cast<Checkpoint&>(a);
  const auto pa = snapshot(ma.model), pb = snapshot(b.model);
  CHECK(pa == pb);
  CHECK(b.step == a.step);
  CHECK(b.optimizer == a.optimizer);
  CHECK(b.config == a.config);
  CHECK(b.model.vocab == a.model.vocab);
  CHECK(b.epoch_losses == a.epoch_losses);

  // Every proper prefix fails.
  for (std::size_t cut : {first.size() - 1, first.size() - 4, first.size() / 2, std::size_t{20}}) {
    CHECK_THROWS_AS(checkpoint_from_string(std::string_view(first).substr(0, cut)), CheckpointError);
  }
  std::string wrong_version = first;
  wrong_version.replace(0, 13, "COT3D-CKPT v2");
  CHECK_THROWS_AS(checkpoint_from_string(wrong_version), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);

  TrainConfig s2 = default_train_config(2);
  s2.batch_size = 8;
  s2.annotation_condition = AnnotationFormat::kNone;
  const Checkpoint resumed = train_stage2(s2, b, recs);
  CHECK(resumed.step == a.step + 2);
  CHECK(resumed.epoch_losses.size() == 3);
}

TEST_CASE("non-finite training aborts with the step") {
  const auto& recs = tiny_dataset();
  TrainConfig cfg = tiny_stage1();
  cfg.learning_rate = 1e308;
  cfg.grad_clip = 1e308;
  CHECK_THROWS_AS(train_stage1(cfg, recs), TrainingDivergence);
}
