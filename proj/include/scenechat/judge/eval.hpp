// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "scenechat/judge/judge.hpp"
#include "scenechat/prompt/prompt.hpp"

namespace scenechat::judge {

/// Anything that answers an instruction about a target object given the
/// dialogue so far.
class ResponseModel {
 public:
  virtual ~ResponseModel() = default;
  virtual std::string respond(const scene::SceneRecord& scene, int target_id,
                              const std::vector<prompt::DialogueTurn>& history, const std::string& instruction) = 0;
};

/// Stands in for an empty model answer so the item is still judged.
extern const std::string_view kNoResponse;

struct EvalTarget {
  std::size_t scene_index = 0;
  int target_object_id = 0;
};

/// `num_scenes` distinct scenes with one random target each.
std::vector<EvalTarget> sample_eval_targets(const std::vector<scene::SceneRecord>& scenes, int num_scenes,
                                            std::uint64_t seed);

/// Produces the reference sample of the given kind for one target.
using ReferenceSource =
    std::function<dataset::InstructionSample(const scene::SceneRecord&, int target_id, Kind kind, std::uint64_t seed)>;

/// The offline template generator.
ReferenceSource offline_references();

struct EvalOptions {
  int num_scenes = 30;
  std::uint64_t seed = 0;
  int judge_concurrency = 1;
  std::vector<Kind> kinds{Kind::kConversation, Kind::kDetailedCaption};
  /// Reference descriptions rendered into the textualized scene.
  int captions_per_object = 3;
};

struct EvalRecord {
  EvalItem item;
  std::optional<JudgeVerdict> verdict;
  std::string judge_id;
  std::string error;

  nlohmann::json to_json() const;
};

struct EvalResult {
  RelativeScoreReport report;
  std::vector<EvalRecord> records;
};

/// Builds one item per (target, kind): the reference comes from `references`
/// and the candidate from `model`, which answers every turn of a
/// conversation with its own history. Items whose judging throws are
/// excluded and counted.
EvalResult run_eval(ResponseModel& model, const std::vector<scene::SceneRecord>& scenes, JudgeBackend& judge,
                    const EvalOptions& options, const ReferenceSource& references = offline_references());

void write_eval_records(const std::vector<EvalRecord>& records, const std::string& path);

}  // namespace scenechat::judge
