// SPDX-License-Identifier: Apache-2.0

#include "scenechat/train/pipeline.hpp"

#include <filesystem>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/scene/scene_io.hpp"
#include "scenechat/dataset/facts.hpp"
#include "scenechat/scene/synthetic.hpp"

namespace scenechat::train {

nlohmann::json BenchmarkSpec::to_json() const {
  return {{"pretrain_scenes", pretrain_scenes},
          {"train_scenes", train_scenes},
          {"eval_scenes", eval_scenes},
          {"points_per_object", points_per_object},
          {"captions_per_object", captions_per_object},
          {"pretrain_counts", {pretrain_counts.conversations_per_scene, pretrain_counts.detailed_per_scene}},
          {"train_counts", {train_counts.conversations_per_scene, train_counts.detailed_per_scene}},
          {"labeled_per_category", labeled_per_category},
          {"seed", seed}};
}

BenchmarkSpec BenchmarkSpec::from_json(const nlohmann::json& j) {
  BenchmarkSpec s;
  try {
    s.pretrain_scenes = j.value("pretrain_scenes", s.pretrain_scenes);
    s.train_scenes = j.value("train_scenes", s.train_scenes);
    s.eval_scenes = j.value("eval_scenes", s.eval_scenes);
    s.points_per_object = j.value("points_per_object", s.points_per_object);
    s.captions_per_object = j.value("captions_per_object", s.captions_per_object);
    s.labeled_per_category = j.value("labeled_per_category", s.labeled_per_category);
    s.seed = j.value("seed", s.seed);
    if (j.contains("pretrain_counts")) {
      s.pretrain_counts = {j.at("pretrain_counts").at(0).get<int>(), j.at("pretrain_counts").at(1).get<int>()};
    }
    if (j.contains("train_counts")) {
      s.train_counts = {j.at("train_counts").at(0).get<int>(), j.at("train_counts").at(1).get<int>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("benchmark spec", e.what());
  }
  return s;
}

Benchmark make_benchmark(const BenchmarkSpec& spec) {
  auto scenes = [&](int count, std::uint64_t stream, const std::string& prefix) {
    scene::SceneSetSpec s;
    s.count = count;
    s.seed = mix_seed(spec.seed, stream);
    s.points_per_object = spec.points_per_object;
    s.id_prefix = prefix;
    return scene::generate_scene_set(s);
  };
  Benchmark b;
  b.pretrain_scenes = scenes(spec.pretrain_scenes, 1, "pre");
  b.train_scenes = scenes(spec.train_scenes, 2, "train");
  b.eval_scenes = scenes(spec.eval_scenes, 3, "eval");
  b.pretrain_captions = dataset::caption_corpus(b.pretrain_scenes, mix_seed(spec.seed, 4), spec.captions_per_object);
  b.train_captions = dataset::caption_corpus(b.train_scenes, mix_seed(spec.seed, 5), spec.captions_per_object);
  b.pretrain_corpus = dataset::generate_offline(b.pretrain_scenes, spec.pretrain_counts, mix_seed(spec.seed, 6));
  b.train_corpus = dataset::generate_offline(b.train_scenes, spec.train_counts, mix_seed(spec.seed, 7));
  b.labeled_objects = scene::generate_labeled_objects(scene::default_palette(), spec.labeled_per_category,
                                                      mix_seed(spec.seed, 8), {6.0, 6.0, 3.0},
                                                      spec.points_per_object);
  return b;
}

namespace {

namespace fs = std::filesystem;

std::vector<scene::SceneRecord> scenes_if_present(const fs::path& dir) {
  return fs::is_directory(dir) ? scene::load_scene_dir(dir.string()) : std::vector<scene::SceneRecord>{};
}

}  // namespace

void save_benchmark(const Benchmark& b, const std::string& dir) {
  const fs::path root(dir);
  scene::save_scene_dir(b.pretrain_scenes, (root / "pretrain" / "scenes").string());
  scene::save_scene_dir(b.train_scenes, (root / "train" / "scenes").string());
  scene::save_scene_dir(b.eval_scenes, (root / "eval" / "scenes").string());
  dataset::write_captions(b.pretrain_captions, (root / "pretrain" / "captions.jsonl").string());
  dataset::write_captions(b.train_captions, (root / "train" / "captions.jsonl").string());
  dataset::write_corpus(b.pretrain_corpus, (root / "pretrain" / "corpus.jsonl").string());
  dataset::write_corpus(b.train_corpus, (root / "train" / "corpus.jsonl").string());
  if (!b.labeled_objects.empty()) {
    scene::save_scene_dir({scene::SceneRecord{"labeled", b.labeled_objects}}, (root / "labeled" / "scenes").string());
  }
}

Benchmark load_benchmark(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw NotFound("no data directory " + dir);
  Benchmark b;
  b.pretrain_scenes = scenes_if_present(root / "pretrain" / "scenes");
  b.train_scenes = scenes_if_present(root / "train" / "scenes");
  b.eval_scenes = scenes_if_present(root / "eval" / "scenes");
  auto captions = [&](const fs::path& p) {
    return fs::exists(p) ? dataset::read_captions(p.string()) : std::vector<dataset::CaptionRecord>{};
  };
  auto corpus = [&](const fs::path& p) {
    return fs::exists(p) ? dataset::read_corpus(p.string()) : std::vector<dataset::InstructionSample>{};
  };
  b.pretrain_captions = captions(root / "pretrain" / "captions.jsonl");
  b.train_captions = captions(root / "train" / "captions.jsonl");
  b.pretrain_corpus = corpus(root / "pretrain" / "corpus.jsonl");
  b.train_corpus = corpus(root / "train" / "corpus.jsonl");
  for (auto& s : scenes_if_present(root / "labeled" / "scenes")) {
    for (auto& o : s.objects) b.labeled_objects.push_back(std::move(o));
  }
  return b;
}

std::vector<std::string> prompt_scaffold_texts() {
  return {"###Human: <target> ", " </target> <scene> ", " </scene> ", " ###Assistant:", "###Human: ", "###"};
}

lm::Tokenizer build_tokenizer(const std::vector<dataset::CaptionRecord>& captions,
                              const std::vector<dataset::InstructionSample>& corpus) {
  std::vector<std::string> texts = prompt_scaffold_texts();
  for (const auto& c : scene::default_palette()) texts.push_back(" " + c.name + " " + dataset::plural(c.name));
  for (const auto& c : scene::color_names()) texts.push_back(" " + c.name);
  for (const auto& w : dataset::direction_words()) texts.push_back(" " + w);
  texts.push_back(" " + std::string(dataset::kDescribeInstruction) + " " + dataset::kDetailedInstruction);
  for (const auto& c : captions) {
    for (const auto& t : c.captions) texts.push_back(" " + t + "###");
  }
  for (const auto& s : corpus) {
    for (const auto& t : s.turns) {
      texts.push_back(" " + t.instruction + " ");
      texts.push_back(" " + t.response + "###");
    }
  }
  return lm::Tokenizer::build(texts);
}

}  // namespace scenechat::train
