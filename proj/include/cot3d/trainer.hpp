#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cot3d/cotformat.hpp"
#include "cot3d/dataset.hpp"
#include "cot3d/model.hpp"

namespace cot3d {

enum class UnfreezePolicy { kNone, kTopBlock, kAll };
enum class ModelPreset { kLrmLike, kLlmLike };

std::string_view policy_name(UnfreezePolicy p);  // "none" | "top_block" | "all"
UnfreezePolicy parse_policy(std::string_view s);  // throws ConfigError
std::string_view preset_name(ModelPreset p);      // "lrm_like" | "llm_like"
ModelPreset parse_preset(std::string_view s);
UnfreezePolicy default_policy(ModelPreset p);     // lrm_like → all, llm_like → top_block

struct TrainConfig {
  int stage = 1;
  double learning_rate = 2e-3;
  std::size_t batch_size = 256;
  std::size_t epochs = 1;
  double warmup_ratio = 0.03;
  double grad_clip = 1.0;
  UnfreezePolicy unfreeze_policy = UnfreezePolicy::kNone;
  std::uint64_t seed = 42;
  AnnotationFormat annotation_condition = AnnotationFormat::kTagged;
  ModelPreset model_preset = ModelPreset::kLrmLike;
  // When set, each training record draws its rendering from these weights
  // instead of using annotation_condition.
  std::optional<FormatMix> mixture;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.01;
  std::size_t prep_workers = 1;  // threads for geometry/tokenization prep
  ModelConfig model;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Stage 1: lr 2e-3, batch 256. Stage 2: lr 2e-5, batch 128, policy from the
// preset. Both: 1 epoch, warm-up 3%, clip 1.0.
TrainConfig default_train_config(int stage, ModelPreset preset = ModelPreset::kLrmLike);

// Throws ConfigError (e.g. stage 1 with a policy other than none).
void validate_train_config(const TrainConfig& cfg);

// Flat key=value text. Keys: stage, learning_rate, batch_size, epochs,
// warmup_ratio, grad_clip, unfreeze_policy, seed, annotation_condition,
// model_preset, mixture ("tagged,unmarked,none" weights or "off"), beta1,
// beta2, adam_eps, weight_decay, prep_workers, model.<field>. Lines starting
// with '#' and blank lines are ignored. stage and model_preset are applied
// first so the remaining keys override the matching defaults.
TrainConfig parse_train_config(std::string_view text);
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string train_config_to_text(const TrainConfig& cfg);
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg);
// Keys whose value differs from default_train_config(stage, preset).
std::vector<std::string> config_overrides(const TrainConfig& cfg);

// Linear warm-up from 0 over ceil(warmup_ratio·total) steps, then cosine to
// 0 at total_steps. Throws RangeError outside 0 ≤ step ≤ total, total ≥ 1.
double lr_at(long step, long total_steps, const TrainConfig& cfg);

// Global L2 norm over the grads of trainable blocks; scales them down to
// max_norm when above it. Returns the pre-clip norm. Throws
// TrainingDivergence on a non-finite gradient and RangeError for
// max_norm ≤ 0.
double clip_global_norm(const ParamList& params, double max_norm, long step = 0);

struct AdamState {
  long t = 0;  // updates taken with these moments
  std::map<std::string, std::pair<Tensor, Tensor>> moments;  // name → (m, v)

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay with bias correction. Frozen blocks are untouched.
// Blocks named in `no_decay` skip the decay term. A non-finite result throws
// TrainingDivergence.
void adamw_step(const ParamList& params, AdamState& state, double lr, const AdamConfig& cfg,
                const std::vector<std::string>& no_decay = {}, long step = 0);

struct Checkpoint {
  TrainConfig config;
  long step = 0;
  Model model;
  AdamState optimizer;
  std::vector<double> epoch_losses;  // mean training loss per epoch, all stages
  double initial_loss = 0.0;         // full-pass loss before the last run
  double final_loss = 0.0;           // and after it
};

// Per-record inputs with the parameter-independent work done.
struct TrainingSample {
  ShapeGeometry geom;
  std::vector<int> ids;
};

std::vector<TrainingSample> prepare_samples(const Model& model,
                                            const std::vector<DatasetRecord>& records,
                                            const std::vector<std::string>& texts,
                                            std::size_t workers);

// Forward and backward for one batch; accumulates into the grads of trainable
// blocks (text backward only when train_text). Returns the loss.
double accumulate_batch_gradients(Model& model, const std::vector<const TrainingSample*>& batch,
                                  bool train_text);

// Mean loss over fixed, unshuffled batches of `batch_size`, weighted by batch
// size. Parameters are not touched.
double full_pass_loss(const Model& model, const std::vector<TrainingSample>& samples,
                      std::size_t batch_size);

// Texts used for training: render(gold, condition), or a per-record draw
// from the mixture.
std::vector<std::string> training_texts(const std::vector<DatasetRecord>& records,
                                        const TrainConfig& cfg);

// Vocabulary over the gold annotations rendered in all three formats.
Vocab build_training_vocab(const std::vector<DatasetRecord>& records, std::size_t min_freq);

using ProgressFn = std::function<void(std::size_t epoch, double mean_loss)>;

// Text encoder frozen; shape encoder, projection and temperature trained on
// the train split. Throws ConfigError unless cfg.stage == 1 with policy none,
// DataError for an empty train split.
Checkpoint train_stage1(const TrainConfig& cfg, const std::vector<DatasetRecord>& records,
                        const ProgressFn& progress = {});

// Continues from a stage-1 checkpoint with the text side unfrozen per policy.
// The step counter continues; optimizer moments start fresh.
Checkpoint train_stage2(const TrainConfig& cfg, const Checkpoint& ckpt,
                        const std::vector<DatasetRecord>& records,
                        const ProgressFn& progress = {});

// Text format with hex-float values, headed by "COT3D-CKPT v1" and closed by
// "END". save→load→save is byte-identical. Truncated or malformed files
// throw CheckpointError.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(std::string_view text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cot3d
