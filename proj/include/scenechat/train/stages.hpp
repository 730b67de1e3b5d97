// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenechat/dataset/sample.hpp"
#include "scenechat/nn/tensor.hpp"
#include "scenechat/scene/scene.hpp"
#include "scenechat/train/checkpoint.hpp"

namespace scenechat::train {

struct StageConfig {
  int stage = 1;
  std::set<std::string> trainable{"f_e", "f_a"};
  double lr = 1e-3;
  int steps = 100;
  int batch_size = 8;
  std::uint64_t seed = 0;

  /// Stage 1: {f_e, f_a} or {g, f_e, f_a}; stages 2 and 3: {f_e, f_a, r}.
  /// Throws ValidationError.
  void validate() const;
  /// Defaults per stage (stage 1 includes g, the encoder being trained from
  /// scratch).
  static StageConfig defaults(int stage);
  nlohmann::json to_json() const;
  /// Missing fields take the stage defaults.
  static StageConfig from_json(const nlohmann::json& j);
};

/// Pretraining of the language model on text with reference slot vectors.
struct PretrainConfig {
  int steps = 3000;
  int batch_size = 8;
  double lr = 2e-3;
  double warmup_fraction = 0.05;
  /// Each sample's slots are scaled by a factor drawn from this range and
  /// perturbed by Gaussian noise of this standard deviation, so the model
  /// tolerates encoder outputs that are only approximately aligned.
  double slot_scale_min = 0.5;
  double slot_scale_max = 2.0;
  double slot_noise = 0.05;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static PretrainConfig from_json(const nlohmann::json& j);
};

struct StageReport {
  int stage = 0;
  int steps = 0;
  /// Mean loss over a fixed probe set before the first and after the last
  /// step (stages 2 and 3; stage 1 uses its training batches).
  double initial_loss = 0.0;
  double final_loss = 0.0;
  /// Held-out nearest-class-embedding accuracy (stage 1 only).
  double heldout_accuracy = 0.0;
  int skipped = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Called after each optimizer step with the metric record just logged.
using StepCallback = std::function<void(const nlohmann::json&)>;

/// Mean of 1 - cos(z_i, y_i). `y` rows must be unit-norm; a zero row of `z`
/// throws InvalidInput.
nn::Var stage1_align_loss(const nn::Var& z, const nn::Var& y);

/// Trains groups lm and oracle on `brief` captions (instruction "Describe
/// this object.") and `corpus`, with loss on every text position.
StageReport pretrain_lm(TrainingState& state, const std::vector<scene::SceneRecord>& scenes,
                        const std::vector<dataset::CaptionRecord>& brief, const std::vector<dataset::InstructionSample>& corpus,
                        const PretrainConfig& config, const StepCallback& on_step = {});

struct Stage1Options {
  double holdout_fraction = 0.2;
  /// Held-out accuracy is logged every this many steps (and at the end).
  int eval_every = 100;
};

/// Aligns single-object embeddings with the class-name embeddings of their
/// categories. Requires a pretrained LM.
StageReport run_stage1(TrainingState& state, const std::vector<scene::ObjectRecord>& objects, const StageConfig& config,
                       const Stage1Options& options = {}, const StepCallback& on_step = {});

/// Nearest class-name embedding by cosine among `categories`.
std::string nearest_category(const TrainingState& state, const nn::RowVector& z,
                             const std::vector<std::string>& categories);

struct Stage2Options {
  /// Skip stage 1 (ablation); otherwise a stage-1 checkpoint is required.
  bool two_stage = false;
  int probe_size = 64;
};

/// Scene captioning: every object of every scene is the target once per
/// epoch and one of its brief captions is the response.
StageReport run_stage2(TrainingState& state, const std::vector<scene::SceneRecord>& scenes,
                       const std::vector<dataset::CaptionRecord>& captions, const StageConfig& config,
                       const Stage2Options& options = {}, const StepCallback& on_step = {});

/// Number of stage-2 samples per epoch (one per object).
std::size_t stage2_epoch_size(const std::vector<scene::SceneRecord>& scenes);

struct Stage3Options {
  int probe_size = 64;
};

/// Instruction tuning on conversations and detailed captions; each sample
/// is one loss-masked sequence.
StageReport run_stage3(TrainingState& state, const std::vector<scene::SceneRecord>& scenes,
                       const std::vector<dataset::InstructionSample>& corpus, const StageConfig& config,
                       const Stage3Options& options = {}, const StepCallback& on_step = {});

/// Fingerprint of a corpus as stored on disk.
std::string corpus_fingerprint(const std::vector<dataset::InstructionSample>& corpus);

}  // namespace scenechat::train
