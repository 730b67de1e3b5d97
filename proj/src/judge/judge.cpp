// SPDX-License-Identifier: Apache-2.0

#include "scenechat/judge/judge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <regex>

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"
#include "scenechat/dataset/facts.hpp"

namespace scenechat::judge {

const std::string_view kCriteria = "helpfulness, relevance, accuracy, and level of detail";

void EvalItem::validate() const {
  if (trim(instruction).empty()) throw ValidationError("eval item has an empty instruction");
  if (trim(reference_response).empty()) throw ValidationError("eval item has an empty reference response");
  if (trim(candidate_response).empty()) throw ValidationError("eval item has an empty candidate response");
}

std::string build_judge_request(const EvalItem& item, bool swapped) {
  item.validate();
  const std::string& first = swapped ? item.reference_response : item.candidate_response;
  const std::string& second = swapped ? item.candidate_response : item.reference_response;
  std::string out;
  out += "[Context]\n" + item.scene.render() + "\n\n";
  out += "[Question]\n" + item.instruction + "\n\n";
  out += "[Assistant 1]\n" + first + "\n[End of Assistant 1]\n\n";
  out += "[Assistant 2]\n" + second + "\n[End of Assistant 2]\n\n";
  out += "[System]\n";
  out += "Two AI assistants answered a question about the described object in a 3D scene. The context above lists "
         "reference descriptions of the object and the categories and locations of the object and its neighbors.\n";
  out += "Please rate the " + std::string(kCriteria) +
         " of their responses. Each assistant receives an overall score on a scale of 1 to 10, where a higher "
         "score indicates better overall performance.\n";
  out += "Output the scores on the first two lines as \"Assistant 1: <score>\" and \"Assistant 2: <score>\". "
         "Then explain your evaluation, avoiding any bias from the order in which the responses were presented.\n";
  return out;
}

namespace {

double check_range(long long v, std::string_view raw) {
  if (v < 1 || v > 10) {
    throw ParseError("judge verdict", "score " + std::to_string(v) + " outside 1..10 in: " + std::string(raw));
  }
  return static_cast<double>(v);
}

}  // namespace

JudgeVerdict parse_verdict(std::string_view text) {
  const std::string s(text);
  static const std::regex kLabel1(R"(Assistant\s*1\s*[:=\-]?\s*(-?\d+))", std::regex::icase);
  static const std::regex kLabel2(R"(Assistant\s*2\s*[:=\-]?\s*(-?\d+))", std::regex::icase);
  std::smatch m1, m2;
  JudgeVerdict v;
  if (std::regex_search(s, m1, kLabel1) && std::regex_search(s, m2, kLabel2)) {
    v.candidate_score = check_range(std::stoll(m1[1].str()), text);
    v.reference_score = check_range(std::stoll(m2[1].str()), text);
    const auto end = std::max(m1.position(0) + m1.length(0), m2.position(0) + m2.length(0));
    v.rationale = trim(std::string_view(s).substr(static_cast<std::size_t>(end)));
    return v;
  }
  static const std::regex kInt(R"(-?\d+)");
  std::vector<long long> found;
  std::size_t end = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kInt); it != std::sregex_iterator() && found.size() < 2;
       ++it) {
    if (it->length(0) > 18) throw ParseError("judge verdict", "score too long in: " + s);
    found.push_back(std::stoll(it->str()));
    end = static_cast<std::size_t>(it->position(0) + it->length(0));
  }
  if (found.size() < 2) throw ParseError("judge verdict", "fewer than two scores in: " + s);
  v.candidate_score = check_range(found[0], text);
  v.reference_score = check_range(found[1], text);
  v.rationale = trim(std::string_view(s).substr(end));
  return v;
}

nlohmann::json RelativeScoreReport::to_json() const {
  nlohmann::json j;
  auto name = [](Kind k) { return k == Kind::kConversation ? "Conversation" : "Detailed Caption"; };
  for (const auto& [k, v] : per_kind) j[name(k)] = v;
  j["Overall"] = overall;
  nlohmann::json c;
  for (const auto& [k, n] : counts) c[name(k)] = n;
  j["counts"] = c;
  j["excluded"] = excluded;
  return j;
}

namespace {

double round1(double x) { return std::round(x * 10.0) / 10.0; }

}  // namespace

RelativeScoreReport relative_score(const std::vector<std::pair<Kind, JudgeVerdict>>& verdicts) {
  if (verdicts.empty()) throw InvalidInput("relative_score needs at least one verdict");
  std::map<Kind, std::pair<double, double>> sums;
  double cand = 0.0, ref = 0.0;
  RelativeScoreReport r;
  for (const auto& [k, v] : verdicts) {
    sums[k].first += v.candidate_score;
    sums[k].second += v.reference_score;
    cand += v.candidate_score;
    ref += v.reference_score;
    ++r.counts[k];
  }
  for (const auto& [k, s] : sums) r.per_kind[k] = round1(100.0 * s.first / s.second);
  r.overall = round1(100.0 * cand / ref);
  return r;
}

namespace {

const std::vector<std::string> kNumberWords{"zero", "one", "two",   "three", "four", "five",
                                            "six",  "seven", "eight", "nine", "ten"};

std::optional<int> as_number(const std::string& w) {
  if (!w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return w.size() > 6 ? std::nullopt : std::optional<int>(std::stoi(w));
  }
  for (std::size_t i = 0; i < kNumberWords.size(); ++i) {
    if (w == kNumberWords[i]) return static_cast<int>(i);
  }
  return std::nullopt;
}

/// Does `phrase` (lowercase words) occur at `pos`? The last word may carry a
/// plural "s".
bool matches_at(const std::vector<std::string>& words, std::size_t pos, const std::vector<std::string>& phrase,
                bool allow_plural) {
  if (phrase.empty() || pos + phrase.size() > words.size()) return false;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    const auto& w = words[pos + i];
    if (w == phrase[i]) continue;
    if (allow_plural && i + 1 == phrase.size() && w == phrase[i] + "s") continue;
    return false;
  }
  return true;
}

bool mentions(const std::vector<std::string>& words, const std::vector<std::string>& phrase, bool allow_plural) {
  for (std::size_t p = 0; p < words.size(); ++p) {
    if (matches_at(words, p, phrase, allow_plural)) return true;
  }
  return false;
}

}  // namespace

int RubricBreakdown::score() const { return std::clamp(1 + raw(), 1, 10); }

RubricBreakdown rubric(const std::string& response, Kind kind, const scene::SceneRecord& scene, int target_id) {
  const auto& t = scene.at(target_id);
  const auto words = lower_words(response);
  const auto cat = lower_words(t.category);
  RubricBreakdown b;
  if (mentions(words, cat, true)) b.category = 3;
  if (mentions(words, {dataset::color_word(t)}, false)) b.color = 1;

  const auto nn = dataset::knn_neighbors(scene, target_id, 1);
  if (!nn.empty() && mentions(words, lower_words(nn[0]->category), true)) b.neighbor = 2;

  const int truth = scene.count_category(t.category);
  bool claimed = false, right = false;
  for (std::size_t p = 0; p + 1 < words.size(); ++p) {
    const auto n = as_number(words[p]);
    if (n && matches_at(words, p + 1, cat, true)) {
      claimed = true;
      right = right || *n == truth;
    }
  }
  if (right) {
    b.count = 2;
  } else if (claimed) {
    b.count = -1;
  }

  if (!nn.empty() && mentions(words, lower_words(nn[0]->category), true)) {
    const std::string truth_dir = dataset::direction_word(*nn[0], t);
    bool said_true = false, said_other = false;
    for (const auto& d : dataset::direction_words()) {
      if (!mentions(words, lower_words(d), false)) continue;
      (d == truth_dir ? said_true : said_other) = true;
    }
    if (said_true) {
      b.direction = 1;
    } else if (said_other) {
      b.direction = -1;
    }
  }

  if (kind == Kind::kDetailedCaption) {
    const auto n = word_count(response);
    if (n >= static_cast<std::size_t>(dataset::kMinCaptionWords) && n <= static_cast<std::size_t>(dataset::kMaxCaptionWords)) {
      b.length = 2;
    }
  }
  return b;
}

JudgeVerdict rule_based_judge(const EvalItem& item, const scene::SceneRecord& scene) {
  const auto c = rubric(item.candidate_response, item.kind, scene, item.target_object_id);
  const auto r = rubric(item.reference_response, item.kind, scene, item.target_object_id);
  JudgeVerdict v;
  v.candidate_score = c.score();
  v.reference_score = r.score();
  v.rationale = "rubric raw " + std::to_string(c.raw()) + " vs " + std::to_string(r.raw());
  return v;
}

JudgeVerdict LlmJudge::judge(const EvalItem& item, const scene::SceneRecord&) {
  auto v = parse_verdict(client_->complete(build_judge_request(item, false)));
  if (!swap_) return v;
  const auto w = parse_verdict(client_->complete(build_judge_request(item, true)));
  JudgeVerdict out;
  out.candidate_score = (v.candidate_score + w.reference_score) / 2.0;
  out.reference_score = (v.reference_score + w.candidate_score) / 2.0;
  out.rationale = v.rationale + "\n---\n" + w.rationale;
  return out;
}

}  // namespace scenechat::judge
