// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <json.hpp>

#include "scenechat/encoder/encoder.hpp"
#include "scenechat/lm/lm.hpp"
#include "scenechat/lm/tokenizer.hpp"
#include "scenechat/nn/layers.hpp"
#include "scenechat/nn/param_store.hpp"

namespace scenechat::train {

struct ModelConfig {
  encoder::EncoderConfig encoder;
  lm::LMConfig lm;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

/// Every trainable piece of the system in one parameter store: the encoder
/// (groups g, f_e, f_a, r), the language model (group lm) and the attribute
/// map used to build reference slot vectors while pretraining the LM
/// (group oracle).
class ModelBundle {
 public:
  ModelBundle(const ModelConfig& config, lm::Tokenizer tokenizer);
  ModelBundle(const ModelBundle&) = delete;
  ModelBundle& operator=(const ModelBundle&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore& store() { return store_; }
  const nn::ParamStore& store() const { return store_; }
  encoder::GeometryEncoder& encoder() { return *encoder_; }
  const encoder::GeometryEncoder& encoder() const { return *encoder_; }
  const lm::ToyLM& lm() const { return *lm_; }
  const lm::Tokenizer& tokenizer() const { return lm_->tokenizer(); }
  const nn::Linear& oracle_attributes() const { return oracle_attr_; }

  /// Reference slot vectors for a scene (target first): the class-name
  /// embedding of each object's category plus a learned map of its
  /// normalized attributes.
  nn::Var oracle_slots(const scene::SceneRecord& scene, int target_id) const;

 private:
  ModelConfig config_;
  nn::ParamStore store_;
  std::unique_ptr<encoder::GeometryEncoder> encoder_;
  std::unique_ptr<lm::ToyLM> lm_;
  nn::Linear oracle_attr_;
};

}  // namespace scenechat::train
