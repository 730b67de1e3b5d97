// SPDX-License-Identifier: Apache-2.0

#include "scenechat/train/bundle.hpp"

#include <cmath>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/nn/ops.hpp"

namespace scenechat::train {

nlohmann::json ModelConfig::to_json() const {
  return {{"encoder", encoder.to_json()}, {"lm", lm.to_json()}, {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("encoder")) c.encoder = encoder::EncoderConfig::from_json(j.at("encoder"));
  if (j.contains("lm")) c.lm = lm::LMConfig::from_json(j.at("lm"));
  c.seed = j.value("seed", c.seed);
  return c;
}

ModelBundle::ModelBundle(const ModelConfig& config, lm::Tokenizer tokenizer) : config_(config) {
  config_.encoder.validate();
  if (config_.encoder.d_model != config_.lm.d_model) {
    throw ValidationError("encoder d_model " + std::to_string(config_.encoder.d_model) + " differs from the LM's " +
                          std::to_string(config_.lm.d_model));
  }
  Rng enc_rng(mix_seed(config_.seed, 1));
  encoder_ = std::make_unique<encoder::GeometryEncoder>(config_.encoder, store_, enc_rng);
  Rng lm_rng(mix_seed(config_.seed, 2));
  lm_ = std::make_unique<lm::ToyLM>(config_.lm, std::move(tokenizer), store_, lm_rng);
  config_.lm = lm_->config();
  Rng oracle_rng(mix_seed(config_.seed, 3));
  oracle_attr_ = nn::Linear::create(store_, "oracle.attr", 9, config_.lm.d_model,
                                    0.1 / std::sqrt(static_cast<double>(config_.lm.d_model)), oracle_rng);
}

nn::Var ModelBundle::oracle_slots(const scene::SceneRecord& scene, int target_id) const {
  const auto stats = encoder::SceneStats::of(scene);
  std::vector<const scene::ObjectRecord*> order{&scene.at(target_id)};
  for (const auto* o : scene.others(target_id)) order.push_back(o);
  std::vector<nn::Var> rows;
  nn::Matrix attrs(static_cast<Eigen::Index>(order.size()), 9);
  for (std::size_t i = 0; i < order.size(); ++i) {
    rows.push_back(lm_->class_name_embedding_var(order[i]->category));
    attrs.row(static_cast<Eigen::Index>(i)) = encoder::normalized_attributes(*order[i], stats).row(0);
  }
  return nn::add(nn::concat_rows(rows), oracle_attr_(nn::Var::constant(attrs)));
}

}  // namespace scenechat::train
