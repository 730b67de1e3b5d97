// SPDX-License-Identifier: Apache-2.0

#include "scenechat/judge/eval.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "scenechat/core/error.hpp"
#include "scenechat/core/rng.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/offline.hpp"

namespace scenechat::judge {

const std::string_view kNoResponse = "(no response)";

std::vector<EvalTarget> sample_eval_targets(const std::vector<scene::SceneRecord>& scenes, int num_scenes,
                                            std::uint64_t seed) {
  if (num_scenes < 1) throw InvalidInput("num_scenes must be >= 1");
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (scenes[i].objects.size() >= 2) usable.push_back(i);
  }
  if (usable.size() < static_cast<std::size_t>(num_scenes)) {
    throw InvalidInput("need " + std::to_string(num_scenes) + " scenes with at least 2 objects, have " +
                       std::to_string(usable.size()));
  }
  Rng rng(mix_seed(seed, 31));
  rng.shuffle(std::span(usable));
  usable.resize(static_cast<std::size_t>(num_scenes));
  std::sort(usable.begin(), usable.end());
  std::vector<EvalTarget> out;
  for (const auto i : usable) {
    const auto& objs = scenes[i].objects;
    out.push_back({i, objs[rng.index(objs.size())].id});
  }
  return out;
}

ReferenceSource offline_references() {
  return [](const scene::SceneRecord& s, int target, Kind kind, std::uint64_t seed) {
    return kind == Kind::kConversation ? dataset::offline_conversation(s, target, seed)
                                       : dataset::offline_detailed_caption(s, target, seed);
  };
}

nlohmann::json EvalRecord::to_json() const {
  nlohmann::json j = {{"scene_id", item.scene_id},
                      {"target_object_id", item.target_object_id},
                      {"kind", dataset::to_string(item.kind)},
                      {"instruction", item.instruction},
                      {"reference", item.reference_response},
                      {"candidate", item.candidate_response},
                      {"judge", judge_id}};
  if (verdict) {
    j["verdict"] = {{"candidate_score", verdict->candidate_score},
                    {"reference_score", verdict->reference_score},
                    {"rationale", verdict->rationale}};
  } else {
    j["verdict"] = nullptr;
    j["error"] = error;
  }
  return j;
}

namespace {

std::string join_lines(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "\n" : "") + parts[i];
  return out;
}

}  // namespace

EvalResult run_eval(ResponseModel& model, const std::vector<scene::SceneRecord>& scenes, JudgeBackend& judge,
                    const EvalOptions& options, const ReferenceSource& references) {
  if (options.judge_concurrency < 1) throw InvalidInput("judge_concurrency must be >= 1");
  const auto targets = sample_eval_targets(scenes, options.num_scenes, options.seed);

  EvalResult result;
  for (const auto& t : targets) {
    const auto& s = scenes[t.scene_index];
    const auto captions = dataset::brief_captions(s, t.target_object_id, options.seed, options.captions_per_object);
    const auto tx = dataset::textualize(s, t.target_object_id, captions);
    for (const Kind kind : options.kinds) {
      const auto ref = references(s, t.target_object_id, kind, mix_seed(options.seed, 101));
      std::vector<std::string> questions, ref_answers, answers;
      std::vector<prompt::DialogueTurn> history;
      for (const auto& turn : ref.turns) {
        questions.push_back(turn.instruction);
        ref_answers.push_back(turn.response);
        std::string reply = model.respond(s, t.target_object_id, history, turn.instruction);
        if (trim(reply).empty()) reply = kNoResponse;
        answers.push_back(reply);
        history.push_back({turn.instruction, reply});
      }
      EvalRecord rec;
      rec.item = {s.scene_id, t.target_object_id, kind, tx, join_lines(questions), join_lines(ref_answers),
                  join_lines(answers)};
      rec.judge_id = judge.id();
      result.records.push_back(std::move(rec));
    }
  }

  std::vector<const scene::SceneRecord*> scene_of;
  for (const auto& t : targets) {
    for (std::size_t k = 0; k < options.kinds.size(); ++k) scene_of.push_back(&scenes[t.scene_index]);
  }
  std::atomic<std::size_t> cursor{0};
  auto worker = [&] {
    for (std::size_t i = cursor++; i < result.records.size(); i = cursor++) {
      auto& rec = result.records[i];
      try {
        rec.item.validate();
        rec.verdict = judge.judge(rec.item, *scene_of[i]);
      } catch (const Error& e) {
        rec.error = e.what();
      }
    }
  };
  const int n_threads = std::min<int>(options.judge_concurrency, static_cast<int>(result.records.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }

  std::vector<std::pair<Kind, JudgeVerdict>> verdicts;
  int excluded = 0;
  for (const auto& rec : result.records) {
    if (rec.verdict) {
      verdicts.emplace_back(rec.item.kind, *rec.verdict);
    } else {
      ++excluded;
    }
  }
  if (verdicts.empty()) throw Error("every eval item failed to be judged; first error: " + result.records[0].error);
  result.report = relative_score(verdicts);
  result.report.excluded = excluded;
  return result;
}

void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path) {
  std::string out;
  for (const auto& r : records) out += r.to_json().dump() + "\n";
  write_file(path, out);
}

}  // namespace scenechat::judge
