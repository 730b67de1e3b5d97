// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenechat/dataset/external.hpp"
#include "scenechat/dataset/sample.hpp"
#include "scenechat/dataset/textualize.hpp"
#include "scenechat/scene/scene.hpp"

namespace scenechat::judge {

using dataset::Kind;

/// One judged exchange. Conversations are judged whole: `instruction` holds
/// the questions and both responses hold the answers, one per line.
struct EvalItem {
  std::string scene_id;
  int target_object_id = 0;
  Kind kind = Kind::kConversation;
  dataset::TextualizedScene scene;
  std::string instruction;
  std::string reference_response;
  std::string candidate_response;

  /// Throws ValidationError when a response or the instruction is empty.
  void validate() const;
};

/// Scores on the 1 to 10 scale. Single passes give integers; the
/// swap-and-average mode can produce halves.
struct JudgeVerdict {
  double candidate_score = 1;
  double reference_score = 1;
  std::string rationale;
};

/// Phrase naming the four judging criteria.
extern const std::string_view kCriteria;

/// Scene context, instruction, then Assistant 1 and Assistant 2. The
/// candidate is Assistant 1 unless `swapped`.
std::string build_judge_request(const EvalItem& item, bool swapped = false);

/// Labeled "Assistant 1: x" / "Assistant 2: y" lines when present, otherwise
/// the first two integers. Throws ParseError (message includes the raw
/// text) when fewer than two scores are found or one is outside 1..10.
JudgeVerdict parse_verdict(std::string_view text);

struct RelativeScoreReport {
  std::map<Kind, double> per_kind;
  std::map<Kind, int> counts;
  double overall = 0.0;
  int excluded = 0;

  nlohmann::json to_json() const;
};

/// 100 * sum(candidate) / sum(reference) per kind and pooled over all
/// items, rounded to one decimal.
RelativeScoreReport relative_score(const std::vector<std::pair<Kind, JudgeVerdict>>& verdicts);

/// Rubric points for one response, before mapping to 1..10.
struct RubricBreakdown {
  int category = 0;
  int color = 0;
  int neighbor = 0;
  int count = 0;
  int direction = 0;
  int length = 0;
  int raw() const { return category + color + neighbor + count + direction + length; }
  int score() const;
};

RubricBreakdown rubric(const std::string& response, Kind kind, const scene::SceneRecord& scene, int target_id);

/// Scores both responses with the rubric.
JudgeVerdict rule_based_judge(const EvalItem& item, const scene::SceneRecord& scene);

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string id() const = 0;
  virtual JudgeVerdict judge(const EvalItem& item, const scene::SceneRecord& scene) = 0;
};

class RuleBasedJudge : public JudgeBackend {
 public:
  std::string id() const override { return "rule_based"; }
  JudgeVerdict judge(const EvalItem& item, const scene::SceneRecord& scene) override {
    return rule_based_judge(item, scene);
  }
};

/// Returns whatever the callback produces.
class MockJudge : public JudgeBackend {
 public:
  using Fn = std::function<JudgeVerdict(const EvalItem&)>;
  explicit MockJudge(Fn fn) : fn_(std::move(fn)) {}
  std::string id() const override { return "mock"; }
  JudgeVerdict judge(const EvalItem& item, const scene::SceneRecord&) override { return fn_(item); }

 private:
  Fn fn_;
};

/// Sends build_judge_request to a chat model and parses the reply. With
/// `swap_and_average`, asks a second time with the assistants swapped and
/// averages the two verdicts.
class LlmJudge : public JudgeBackend {
 public:
  LlmJudge(std::shared_ptr<dataset::ChatClient> client, bool swap_and_average = false)
      : client_(std::move(client)), swap_(swap_and_average) {}
  std::string id() const override { return swap_ ? "llm_swap" : "llm"; }
  JudgeVerdict judge(const EvalItem& item, const scene::SceneRecord& scene) override;

 private:
  std::shared_ptr<dataset::ChatClient> client_;
  bool swap_;
};

}  // namespace scenechat::judge
