// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenechat/dataset/offline.hpp"
#include "scenechat/dataset/sample.hpp"
#include "scenechat/lm/tokenizer.hpp"
#include "scenechat/scene/scene.hpp"

namespace scenechat::train {

/// Sizes and seeds of the offline synthetic benchmark. The three scene sets
/// are generated from disjoint seeds.
struct BenchmarkSpec {
  int pretrain_scenes = 800;
  int train_scenes = 500;
  int eval_scenes = 60;
  int points_per_object = 64;
  int captions_per_object = 3;
  dataset::OfflineCounts pretrain_counts{2, 1};
  dataset::OfflineCounts train_counts{1, 1};
  int labeled_per_category = 64;
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  /// Missing fields keep their defaults.
  static BenchmarkSpec from_json(const nlohmann::json& j);
};

struct Benchmark {
  std::vector<scene::SceneRecord> pretrain_scenes;
  std::vector<scene::SceneRecord> train_scenes;
  std::vector<scene::SceneRecord> eval_scenes;
  std::vector<dataset::CaptionRecord> pretrain_captions;
  std::vector<dataset::CaptionRecord> train_captions;
  std::vector<dataset::InstructionSample> pretrain_corpus;
  std::vector<dataset::InstructionSample> train_corpus;
  std::vector<scene::ObjectRecord> labeled_objects;
};

Benchmark make_benchmark(const BenchmarkSpec& spec);

/// Directory layout of a data set:
///   {pretrain,train,eval}/scenes/<scene_id>.json
///   {pretrain,train}/captions.jsonl, {pretrain,train}/corpus.jsonl
///   labeled/scenes/labeled.json   (all labeled objects as one record)
void save_benchmark(const Benchmark& benchmark, const std::string& dir);
/// Parts whose files are absent load as empty.
Benchmark load_benchmark(const std::string& dir);

/// Text segments of the prompt layout, so the tokenizer covers them.
std::vector<std::string> prompt_scaffold_texts();

/// Vocabulary over the prompt scaffold, palette names and the given texts.
lm::Tokenizer build_tokenizer(const std::vector<dataset::CaptionRecord>& captions,
                              const std::vector<dataset::InstructionSample>& corpus);

}  // namespace scenechat::train
