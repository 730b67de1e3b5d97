// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenechat/nn/param_store.hpp"
#include "scenechat/train/bundle.hpp"

namespace scenechat::train {

/// Stage numbers; kPretrained marks a language model trained but no
/// alignment stage run yet.
inline constexpr int kNoStage = -1;
inline constexpr int kPretrained = 0;

struct CheckpointManifest {
  int stage_completed = kNoStage;
  /// Stage 1 was skipped on purpose (ablation).
  bool two_stage = false;
  /// The relation module has been zero-initialized (happens once).
  bool relation_zeroed = false;
  std::int64_t global_step = 0;
  std::string params_file = "params.ckpt";
  std::string vocab_file = "vocab.txt";
  std::string metrics_file = "metrics.jsonl";
  nlohmann::json model_config = nlohmann::json::object();
  /// One entry per completed stage: its StageConfig and summary metrics.
  nlohmann::json stages = nlohmann::json::array();
  std::string corpus_fingerprint;

  nlohmann::json to_json() const;
  static CheckpointManifest from_json(const nlohmann::json& j);
};

/// A model together with its training history.
struct TrainingState {
  std::unique_ptr<ModelBundle> bundle;
  CheckpointManifest manifest;
  /// One record per optimizer step, ordered by "step".
  std::vector<nlohmann::json> metrics;
};

TrainingState fresh_state(const ModelConfig& config, lm::Tokenizer tokenizer);

/// Binary parameter archive: magic line, 8-byte header length, JSON header
/// listing names and shapes, then little-endian float64 values.
void write_params(const nn::ParamStore& store, const std::string& path, const std::string& tag = "");
/// Loads every parameter of `store` by name. Throws ParseError on a corrupt
/// file and ValidationError on missing names or shape mismatches.
void read_params(nn::ParamStore& store, const std::string& path);

/// Writes params, vocabulary, metrics and manifest.json into `dir`.
void save_checkpoint(const TrainingState& state, const std::string& dir);
/// Rebuilds the model from manifest.json and loads its files. Throws when a
/// referenced file is missing or the metric log is out of order.
TrainingState load_checkpoint(const std::string& dir);

/// `flag` when non-empty, else $SCENECHAT_CHECKPOINT when set, else
/// `fallback`.
std::string resolve_checkpoint_dir(const std::string& flag, const std::string& fallback);

}  // namespace scenechat::train
