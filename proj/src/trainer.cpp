#include "cot3d/trainer.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <set>
#include <span>
#include <sstream>

#include "cot3d/errors.hpp"
#include "cot3d/io.hpp"
#include "cot3d/remote.hpp"

namespace cot3d {

// ---- names ----

std::string_view policy_name(UnfreezePolicy p) {
  switch (p) {
    case UnfreezePolicy::kNone:
      return "none";
    case UnfreezePolicy::kTopBlock:
      return "top_block";
    case UnfreezePolicy::kAll:
      return "all";
  }
  return "none";
}

UnfreezePolicy parse_policy(std::string_view s) {
  if (s == "none") return UnfreezePolicy::kNone;
  if (s == "top_block") return UnfreezePolicy::kTopBlock;
  if (s == "all") return UnfreezePolicy::kAll;
  throw ConfigError("unknown unfreeze policy '" + std::string(s) + "' (none|top_block|all)");
}

std::string_view preset_name(ModelPreset p) {
  return p == ModelPreset::kLrmLike ? "lrm_like" : "llm_like";
}

ModelPreset parse_preset(std::string_view s) {
  if (s == "lrm_like") return ModelPreset::kLrmLike;
  if (s == "llm_like") return ModelPreset::kLlmLike;
  throw ConfigError("unknown model preset '" + std::string(s) + "' (lrm_like|llm_like)");
}

UnfreezePolicy default_policy(ModelPreset p) {
  return p == ModelPreset::kLrmLike ? UnfreezePolicy::kAll : UnfreezePolicy::kTopBlock;
}

// ---- config ----

TrainConfig default_train_config(int stage, ModelPreset preset) {
  if (stage != 1 && stage != 2) throw ConfigError("stage must be 1 or 2");
  TrainConfig c;
  c.stage = stage;
  c.model_preset = preset;
  if (stage == 2) {
    c.learning_rate = 2e-5;
    c.batch_size = 128;
    c.unfreeze_policy = default_policy(preset);
  }
  return c;
}

void validate_train_config(const TrainConfig& c) {
  if (c.stage != 1 && c.stage != 2) throw ConfigError("stage must be 1 or 2");
  if (c.stage == 1 && c.unfreeze_policy != UnfreezePolicy::kNone) {
    throw ConfigError("stage 1 keeps the text side frozen: unfreeze_policy must be none, got " +
                      std::string(policy_name(c.unfreeze_policy)));
  }
  if (!(c.learning_rate > 0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.epochs == 0) throw ConfigError("epochs must be positive");
  if (!(c.warmup_ratio >= 0 && c.warmup_ratio <= 1)) throw ConfigError("warmup_ratio must lie in [0, 1]");
  if (!(c.grad_clip > 0)) throw ConfigError("grad_clip must be positive");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(c.adam_eps > 0)) throw ConfigError("adam_eps must be positive");
  if (!(c.weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
  if (c.mixture) validate_mix(*c.mixture);
  if (c.model.keypoints == 0 || c.model.neighbors == 0 || c.model.local_dim == 0 ||
      c.model.global_dim == 0 || c.model.token_dim == 0 || c.model.embed_dim == 0 ||
      c.model.max_len == 0 || c.model.n_freq == 0) {
    throw ConfigError("model sizes must be positive");
  }
  if (c.model.token_dim % 2 != 0) throw ConfigError("model.token_dim must be even");
  if (!(c.model.init_tau >= kMinTau && c.model.init_tau <= kMaxTau)) {
    throw ConfigError("model.init_tau must lie in [1e-3, 10]");
  }
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  auto size = [&] { return static_cast<std::size_t>(parse_uint(key, value)); };
  if (key == "stage") {
    const auto s = parse_uint(key, value);
    if (s != 1 && s != 2) throw ConfigError("stage must be 1 or 2");
    c.stage = static_cast<int>(s);
  } else if (key == "learning_rate") {
    c.learning_rate = parse_double(key, value);
  } else if (key == "batch_size") {
    c.batch_size = size();
  } else if (key == "epochs") {
    c.epochs = size();
  } else if (key == "warmup_ratio") {
    c.warmup_ratio = parse_double(key, value);
  } else if (key == "grad_clip") {
    c.grad_clip = parse_double(key, value);
  } else if (key == "unfreeze_policy") {
    c.unfreeze_policy = parse_policy(value);
  } else if (key == "seed") {
    c.seed = parse_uint(key, value);
  } else if (key == "annotation_condition") {
    auto f = try_parse_format(value);
    if (!f) throw ConfigError("annotation_condition must be none|no_cot|unmarked|tagged");
    c.annotation_condition = *f;
  } else if (key == "model_preset") {
    c.model_preset = parse_preset(value);
  } else if (key == "mixture") {
    if (value == "off") {
      c.mixture.reset();
    } else {
      std::vector<double> w;
      std::stringstream ss(value);
      std::string part;
      while (std::getline(ss, part, ',')) w.push_back(parse_double(key, trim(part)));
      if (w.size() != 3) throw ConfigError("mixture needs three weights: tagged,unmarked,none");
      c.mixture = FormatMix{w[0], w[1], w[2]};
    }
  } else if (key == "beta1") {
    c.beta1 = parse_double(key, value);
  } else if (key == "beta2") {
    c.beta2 = parse_double(key, value);
  } else if (key == "adam_eps") {
    c.adam_eps = parse_double(key, value);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_double(key, value);
  } else if (key == "prep_workers") {
    c.prep_workers = size();
  } else if (key == "model.keypoints") {
    c.model.keypoints = size();
  } else if (key == "model.neighbors") {
    c.model.neighbors = size();
  } else if (key == "model.local_dim") {
    c.model.local_dim = size();
  } else if (key == "model.global_dim") {
    c.model.global_dim = size();
  } else if (key == "model.token_dim") {
    c.model.token_dim = size();
  } else if (key == "model.embed_dim") {
    c.model.embed_dim = size();
  } else if (key == "model.max_len") {
    c.model.max_len = size();
  } else if (key == "model.min_freq") {
    c.model.min_freq = size();
  } else if (key == "model.n_freq") {
    c.model.n_freq = size();
  } else if (key == "model.init_tau") {
    c.model.init_tau = parse_double(key, value);
  } else if (key == "overrides") {
    // Written into snapshots for the reader's benefit; recomputed on demand.
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  std::string mix = "off";
  if (c.mixture) {
    mix = fmt_double(c.mixture->tagged) + "," + fmt_double(c.mixture->unmarked) + "," +
          fmt_double(c.mixture->none);
  }
  return {
      {"stage", std::to_string(c.stage)},
      {"model_preset", std::string(preset_name(c.model_preset))},
      {"learning_rate", fmt_double(c.learning_rate)},
      {"batch_size", std::to_string(c.batch_size)},
      {"epochs", std::to_string(c.epochs)},
      {"warmup_ratio", fmt_double(c.warmup_ratio)},
      {"grad_clip", fmt_double(c.grad_clip)},
      {"unfreeze_policy", std::string(policy_name(c.unfreeze_policy))},
      {"seed", std::to_string(c.seed)},
      {"annotation_condition", std::string(format_name(c.annotation_condition))},
      {"mixture", mix},
      {"beta1", fmt_double(c.beta1)},
      {"beta2", fmt_double(c.beta2)},
      {"adam_eps", fmt_double(c.adam_eps)},
      {"weight_decay", fmt_double(c.weight_decay)},
      {"prep_workers", std::to_string(c.prep_workers)},
      {"model.keypoints", std::to_string(c.model.keypoints)},
      {"model.neighbors", std::to_string(c.model.neighbors)},
      {"model.local_dim", std::to_string(c.model.local_dim)},
      {"model.global_dim", std::to_string(c.model.global_dim)},
      {"model.token_dim", std::to_string(c.model.token_dim)},
      {"model.embed_dim", std::to_string(c.model.embed_dim)},
      {"model.max_len", std::to_string(c.model.max_len)},
      {"model.min_freq", std::to_string(c.model.min_freq)},
      {"model.n_freq", std::to_string(c.model.n_freq)},
      {"model.init_tau", fmt_double(c.model.init_tau)},
  };
}

std::vector<std::string> config_overrides(const TrainConfig& c) {
  const auto base = config_entries(default_train_config(c.stage, c.model_preset));
  const auto mine = config_entries(c);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].second != base[i].second) out.push_back(mine[i].first);
  }
  return out;
}

std::string train_config_to_text(const TrainConfig& c) {
  std::string out;
  for (const auto& [k, v] : config_entries(c)) out += k + "=" + v + "\n";
  std::string ov;
  for (const auto& k : config_overrides(c)) ov += (ov.empty() ? "" : ",") + k;
  out += "overrides=" + ov + "\n";
  return out;
}

TrainConfig parse_train_config(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  int stage = 1;
  ModelPreset preset = ModelPreset::kLrmLike;
  for (const auto& [k, v] : entries) {
    TrainConfig probe;
    if (k == "stage") {
      set_config_value(probe, k, v);
      stage = probe.stage;
    } else if (k == "model_preset") {
      preset = parse_preset(v);
    }
  }
  TrainConfig c = default_train_config(stage, preset);
  for (const auto& [k, v] : entries) set_config_value(c, k, v);
  return c;
}

// ---- schedule, clipping, optimizer ----

double lr_at(long step, long total_steps, const TrainConfig& cfg) {
  if (total_steps < 1) throw RangeError("lr_at: total_steps must be at least 1");
  if (step < 0 || step > total_steps) {
    throw RangeError("lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + "]");
  }
  const double peak = cfg.learning_rate;
  // The small offset keeps 0.03 * 100 from ceiling to 4.
  const long warm = static_cast<long>(std::ceil(cfg.warmup_ratio * static_cast<double>(total_steps) - 1e-9));
  if (warm > 0 && step <= warm) return peak * static_cast<double>(step) / static_cast<double>(warm);
  if (warm >= total_steps) return peak;
  const double progress =
      static_cast<double>(step - warm) / static_cast<double>(total_steps - warm);
  return 0.5 * peak * (1.0 + std::cos(std::numbers::pi * progress));
}

double clip_global_norm(const ParamList& params, double max_norm, long step) {
  if (!(max_norm > 0)) throw RangeError("clip_global_norm: max_norm must be positive");
  double sq = 0.0;
  for (const ParamBlock* p : params) {
    if (!p->trainable) continue;
    for (double g : p->grad.data()) {
      if (!std::isfinite(g)) throw TrainingDivergence("non-finite gradient in " + p->name, step);
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw TrainingDivergence("gradient norm overflow", step);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (ParamBlock* p : params) {
      if (!p->trainable) continue;
      for (double& g : p->grad.data()) g *= scale;
    }
  }
  return norm;
}

void adamw_step(const ParamList& params, AdamState& state, double lr, const AdamConfig& cfg,
                const std::vector<std::string>& no_decay, long step) {
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (ParamBlock* p : params) {
    if (!p->trainable) continue;
    auto it = state.moments.find(p->name);
    if (it == state.moments.end()) {
      it = state.moments
               .emplace(p->name, std::make_pair(Tensor(p->value.shape(), 0.0),
                                                Tensor(p->value.shape(), 0.0)))
               .first;
    }
    auto m = it->second.first.data();
    auto v = it->second.second.data();
    auto w = p->value.data();
    const auto& g = p->grad.data();
    if (m.size() != w.size()) throw DimensionError("optimizer state shape mismatch for " + p->name);
    const bool decay = std::find(no_decay.begin(), no_decay.end(), p->name) == no_decay.end();
    const double wd = decay ? cfg.weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * wd * w[i];
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (!std::isfinite(w[i])) throw TrainingDivergence("non-finite parameter in " + p->name, step);
    }
  }
}

// ---- training ----

std::vector<std::string> training_texts(const std::vector<DatasetRecord>& records,
                                        const TrainConfig& cfg) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    AnnotationFormat fmt = cfg.annotation_condition;
    if (cfg.mixture) {
      Rng rng(mix_seed(mix_seed(cfg.seed, 0x6d6978ull), i));
      fmt = draw_format(*cfg.mixture, rng);
    }
    out.push_back(render(records[i].gold, fmt));
  }
  return out;
}

Vocab build_training_vocab(const std::vector<DatasetRecord>& records, std::size_t min_freq) {
  std::vector<std::string> corpus;
  for (const auto& r : records) {
    for (auto f : {AnnotationFormat::kTagged, AnnotationFormat::kUnmarked, AnnotationFormat::kNone}) {
      corpus.push_back(render(r.gold, f));
    }
  }
  return Vocab::build(corpus, min_freq);
}

std::vector<TrainingSample> prepare_samples(const Model& model,
                                            const std::vector<DatasetRecord>& records,
                                            const std::vector<std::string>& texts,
                                            std::size_t workers) {
  if (texts.size() != records.size()) throw DataError("prepare_samples: one text per record");
  return ordered_parallel_map<TrainingSample>(records.size(), workers, [&](std::size_t i) {
    PointCloud pc{records[i].points, records[i].shape_id};
    return TrainingSample{model.prepare(pc), model.token_ids(texts[i])};
  });
}

namespace {

Tensor row_of(const Tensor& t, std::size_t r) {
  Tensor out = Tensor::matrix(1, t.cols());
  for (std::size_t c = 0; c < t.cols(); ++c) out(0, c) = t(r, c);
  return out;
}

void set_row(Tensor& t, std::size_t r, const Tensor& row) {
  for (std::size_t c = 0; c < t.cols(); ++c) t(r, c) = row(0, c);
}

// `frozen_text` holds precomputed text embeddings (one row per batch item)
// when the text side is not trained.
double batch_step(Model& model, const std::vector<const TrainingSample*>& batch, bool train_text,
                  const std::vector<const Tensor*>* frozen_text, bool with_grad) {
  const std::size_t B = batch.size(), d = model.cfg.embed_dim;
  Tensor z3 = Tensor::matrix(B, d), zt = Tensor::matrix(B, d);
  std::vector<ShapeEncoder::Cache> scache(with_grad ? B : 0);
  std::vector<Projection::Cache> pcache(with_grad ? B : 0);
  std::vector<TextEncoder::Cache> tcache(with_grad && train_text ? B : 0);
  for (std::size_t i = 0; i < B; ++i) {
    const ShapeFeatures f = model.shape.forward(batch[i]->geom, with_grad ? &scache[i] : nullptr);
    set_row(z3, i, model.proj.forward(f, with_grad ? &pcache[i] : nullptr));
    if (frozen_text) {
      set_row(zt, i, *(*frozen_text)[i]);
    } else {
      set_row(zt, i, model.text.forward(batch[i]->ids,
                                        with_grad && train_text ? &tcache[i] : nullptr));
    }
  }
  const InfoNceResult res = info_nce(z3, zt, model.temperature.log_tau.value.data()[0], with_grad);
  if (!with_grad) return res.loss;
  for (std::size_t i = 0; i < B; ++i) {
    auto [d_local, d_global] = model.proj.backward(pcache[i], row_of(res.d_z3d, i));
    model.shape.backward(scache[i], d_local, d_global);
    if (train_text) model.text.backward(tcache[i], row_of(res.d_ztext, i));
  }
  model.temperature.log_tau.grad.data()[0] += res.d_log_tau;
  return res.loss;
}

bool any_trainable(const ParamList& ps) {
  return std::any_of(ps.begin(), ps.end(), [](const ParamBlock* p) { return p->trainable; });
}

void run_training(Checkpoint& ck, const TrainConfig& cfg, const std::vector<DatasetRecord>& train,
                  const ProgressFn& progress) {
  Model& model = ck.model;
  const ParamList all = model.params();
  const bool train_text = any_trainable(model.text_params());
  const std::vector<TrainingSample> samples =
      prepare_samples(model, train, training_texts(train, cfg), cfg.prep_workers);
  const std::size_t n = samples.size();

  ck.initial_loss = full_pass_loss(model, samples, cfg.batch_size);

  std::vector<Tensor> frozen;
  if (!train_text) {
    frozen.reserve(n);
    for (const auto& s : samples) frozen.push_back(model.text.forward(s.ids));
  }

  const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const long total = static_cast<long>(per_epoch * cfg.epochs);
  const AdamConfig adam{cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};
  const std::vector<std::string> no_decay{model.temperature.log_tau.name};
  ck.optimizer = AdamState{};

  long k = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(mix_seed(mix_seed(cfg.seed, 0x5eed0000ull + static_cast<std::uint64_t>(cfg.stage)), epoch));
    shuffle_indices(order, rng);

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      std::vector<const TrainingSample*> batch;
      std::vector<const Tensor*> text_rows;
      for (std::size_t j = lo; j < hi; ++j) {
        batch.push_back(&samples[order[j]]);
        if (!train_text) text_rows.push_back(&frozen[order[j]]);
      }
      zero_grads(all);
      double loss = 0.0;
      try {
        loss = batch_step(model, batch, train_text, train_text ? nullptr : &text_rows, true);
      } catch (const DataError& e) {
        // Inputs were validated up front, so this is an overflow inside the model.
        throw TrainingDivergence(e.what(), ck.step);
      }
      if (!std::isfinite(loss)) throw TrainingDivergence("non-finite loss", ck.step);
      clip_global_norm(all, cfg.grad_clip, ck.step);
      adamw_step(all, ck.optimizer, lr_at(k + 1, total, cfg), adam, no_decay, ck.step);
      model.temperature.clamp();
      ++k;
      ++ck.step;
      loss_sum += loss * static_cast<double>(hi - lo);
    }
    const double mean = loss_sum / static_cast<double>(n);
    ck.epoch_losses.push_back(mean);
    if (progress) progress(epoch, mean);
  }
  zero_grads(all);
  ck.final_loss = full_pass_loss(model, samples, cfg.batch_size);
}

}  // namespace

double accumulate_batch_gradients(Model& model, const std::vector<const TrainingSample*>& batch,
                                  bool train_text) {
  if (batch.empty()) throw DataError("empty batch");
  return batch_step(model, batch, train_text, nullptr, true);
}

double full_pass_loss(const Model& model, const std::vector<TrainingSample>& samples,
                      std::size_t batch_size) {
  if (samples.empty()) throw DataError("full_pass_loss: no samples");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  double sum = 0.0;
  for (std::size_t lo = 0; lo < samples.size(); lo += batch_size) {
    const std::size_t hi = std::min(samples.size(), lo + batch_size);
    std::vector<const TrainingSample*> batch;
    for (std::size_t j = lo; j < hi; ++j) batch.push_back(&samples[j]);
    // batch_step without gradients never writes to the model.
    sum += batch_step(const_cast<Model&>(model), batch, false, nullptr, false) *
           static_cast<double>(hi - lo);
  }
  return sum / static_cast<double>(samples.size());
}

Checkpoint train_stage1(const TrainConfig& cfg, const std::vector<DatasetRecord>& records,
                        const ProgressFn& progress) {
  if (cfg.stage != 1) throw ConfigError("train_stage1 needs stage=1, got " + std::to_string(cfg.stage));
  validate_train_config(cfg);
  const auto train = select_split(records, Split::kTrain);
  if (train.empty()) throw DataError("train split is empty");

  Checkpoint ck;
  ck.config = cfg;
  ck.model = Model::create(cfg.model, build_training_vocab(train, cfg.model.min_freq), cfg.seed);
  set_trainable(ck.model.shape_side_params(), true);
  set_trainable(ck.model.text_params(), false);
  run_training(ck, cfg, train, progress);
  return ck;
}

Checkpoint train_stage2(const TrainConfig& cfg_in, const Checkpoint& from,
                        const std::vector<DatasetRecord>& records, const ProgressFn& progress) {
  if (cfg_in.stage != 2) {
    throw ConfigError("train_stage2 needs stage=2, got " + std::to_string(cfg_in.stage));
  }
  TrainConfig cfg = cfg_in;
  // Architecture comes from the checkpoint.
  cfg.model = from.config.model;
  validate_train_config(cfg);
  const auto train = select_split(records, Split::kTrain);
  if (train.empty()) throw DataError("train split is empty");

  Checkpoint ck = from;
  ck.config = cfg;
  set_trainable(ck.model.shape_side_params(), true);
  set_trainable(ck.model.text_params(), false);
  if (cfg.unfreeze_policy == UnfreezePolicy::kAll) {
    set_trainable(ck.model.text_params(), true);
  } else if (cfg.unfreeze_policy == UnfreezePolicy::kTopBlock) {
    set_trainable(ck.model.text.top_block_params(), true);
  }
  run_training(ck, cfg, train, progress);
  return ck;
}

// ---- checkpoint IO ----

namespace {

constexpr std::string_view kMagic = "COT3D-CKPT v1";

std::string hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

std::string hex_row(std::span<const double> vs) {
  std::string out;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (i) out += ' ';
    out += hex(vs[i]);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::string next() {
    if (pos_ >= text_.size()) throw CheckpointError("checkpoint truncated after line " + std::to_string(line_));
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) {
      throw CheckpointError("checkpoint truncated at line " + std::to_string(line_ + 1));
    }
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    ++line_;
    return out;
  }

  std::size_t line() const { return line_; }

  [[noreturn]] void fail(const std::string& what) const {
    throw CheckpointError("checkpoint line " + std::to_string(line_) + ": " + what);
  }

  std::vector<std::string> words() {
    std::istringstream ss(next());
    std::vector<std::string> out;
    std::string w;
    while (ss >> w) out.push_back(w);
    return out;
  }

  std::vector<double> doubles(std::size_t expect) {
    const std::string l = next();
    std::vector<double> out;
    out.reserve(expect);
    const char* p = l.c_str();
    while (*p) {
      while (*p == ' ') ++p;
      if (!*p) break;
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) fail("bad number");
      out.push_back(v);
      p = end;
    }
    if (out.size() != expect) {
      fail("expected " + std::to_string(expect) + " values, found " + std::to_string(out.size()));
    }
    return out;
  }

  std::size_t number(const std::string& w) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || p != w.data() + w.size()) fail("bad count '" + w + "'");
    return v;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

std::string dims(const Tensor& t) {
  std::string out = std::to_string(t.shape().size());
  for (auto s : t.shape()) out += " " + std::to_string(s);
  return out;
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ck_in) {
  Checkpoint& ck = const_cast<Checkpoint&>(ck_in);  // params() hands out pointers
  std::string out(kMagic);
  out += "\n[config]\n" + train_config_to_text(ck.config) + "[state]\n";
  out += "step " + std::to_string(ck.step) + "\n";
  out += "initial_loss " + hex(ck.initial_loss) + "\n";
  out += "final_loss " + hex(ck.final_loss) + "\n";
  out += "epoch_losses " + std::to_string(ck.epoch_losses.size()) + "\n" +
         hex_row(ck.epoch_losses) + "\n";
  const auto tokens = ck.model.vocab.tokens();
  out += "vocab " + std::to_string(tokens.size()) + "\n";
  for (const auto& t : tokens) out += t + "\n";
  const ParamList ps = ck.model.params();
  out += "params " + std::to_string(ps.size()) + "\n";
  for (const ParamBlock* p : ps) {
    out += p->name + " " + (p->trainable ? "1" : "0") + " " + dims(p->value) + "\n";
    out += hex_row(p->value.data()) + "\n";
  }
  out += "adam " + std::to_string(ck.optimizer.t) + " " +
         std::to_string(ck.optimizer.moments.size()) + "\n";
  for (const auto& [name, mv] : ck.optimizer.moments) {
    out += name + " " + dims(mv.first) + "\n";
    out += hex_row(mv.first.data()) + "\n" + hex_row(mv.second.data()) + "\n";
  }
  out += "END\n";
  return out;
}

Checkpoint checkpoint_from_string(std::string_view text) {
  Reader r(text);
  if (r.next() != kMagic) {
    throw CheckpointError("not a checkpoint or unsupported version (expected '" +
                          std::string(kMagic) + "')");
  }
  if (r.next() != "[config]") r.fail("expected [config]");
  std::string cfg_text;
  for (std::string l = r.next(); l != "[state]"; l = r.next()) cfg_text += l + "\n";
  Checkpoint ck;
  try {
    ck.config = parse_train_config(cfg_text);
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("bad config snapshot: ") + e.what());
  }

  auto keyed = [&](const char* key) {
    auto w = r.words();
    if (w.size() != 2 || w[0] != key) r.fail(std::string("expected '") + key + "'");
    return w[1];
  };
  ck.step = static_cast<long>(r.number(keyed("step")));
  ck.initial_loss = std::strtod(keyed("initial_loss").c_str(), nullptr);
  ck.final_loss = std::strtod(keyed("final_loss").c_str(), nullptr);
  const std::size_t n_losses = r.number(keyed("epoch_losses"));
  ck.epoch_losses = r.doubles(n_losses);

  const std::size_t n_vocab = r.number(keyed("vocab"));
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < n_vocab; ++i) tokens.push_back(r.next());
  Vocab vocab;
  try {
    vocab = Vocab::from_lines(tokens);
  } catch (const Error& e) {
    r.fail(e.what());
  }
  ck.model = Model::create(ck.config.model, std::move(vocab), ck.config.seed);

  std::map<std::string, ParamBlock*> by_name;
  for (ParamBlock* p : ck.model.params()) by_name[p->name] = p;
  const std::size_t n_params = r.number(keyed("params"));
  if (n_params != by_name.size()) r.fail("parameter count does not match the model");
  std::set<std::string> seen;
  auto read_shape = [&](const std::vector<std::string>& w, std::size_t from) {
    if (w.size() <= from) r.fail("missing shape");
    const std::size_t rank = r.number(w[from]);
    if (w.size() != from + 1 + rank) r.fail("bad shape");
    std::vector<std::size_t> shape;
    for (std::size_t i = 0; i < rank; ++i) shape.push_back(r.number(w[from + 1 + i]));
    return shape;
  };
  for (std::size_t i = 0; i < n_params; ++i) {
    const auto w = r.words();
    if (w.size() < 3) r.fail("bad parameter header");
    auto it = by_name.find(w[0]);
    if (it == by_name.end() || !seen.insert(w[0]).second) r.fail("unexpected parameter '" + w[0] + "'");
    ParamBlock* p = it->second;
    if (read_shape(w, 2) != p->value.shape()) r.fail("shape mismatch for '" + w[0] + "'");
    p->trainable = w[1] == "1";
    p->value = Tensor(p->value.shape(), r.doubles(p->value.data().size()));
    p->grad = Tensor(p->value.shape(), 0.0);
  }

  const auto aw = r.words();
  if (aw.size() != 3 || aw[0] != "adam") r.fail("expected 'adam'");
  ck.optimizer.t = static_cast<long>(r.number(aw[1]));
  const std::size_t n_moments = r.number(aw[2]);
  for (std::size_t i = 0; i < n_moments; ++i) {
    const auto w = r.words();
    if (w.size() < 2) r.fail("bad moment header");
    const auto shape = read_shape(w, 1);
    std::size_t count = 1;
    for (auto s : shape) count *= s;
    Tensor m(shape, r.doubles(count));
    Tensor v(shape, r.doubles(count));
    ck.optimizer.moments.emplace(w[0], std::make_pair(std::move(m), std::move(v)));
  }
  if (r.next() != "END") r.fail("expected END");
  return ck;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_string(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw CheckpointError(e.what());
  }
  return checkpoint_from_string(text);
}

}  // namespace cot3d
