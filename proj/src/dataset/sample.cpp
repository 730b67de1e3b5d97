// SPDX-License-Identifier: Apache-2.0

#include "scenechat/dataset/sample.hpp"

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"

namespace scenechat::dataset {
namespace {

using nlohmann::json;

template <typename T, typename Fn>
std::vector<T> parse_lines(std::string_view text, Fn parse_one) {
  std::vector<T> out;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      out.push_back(parse_one(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(line_no), e.what());
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(line_no), e.what());
    }
  }
  return out;
}

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(key, "missing field");
  return *it;
}

}  // namespace

std::string to_string(Kind kind) { return kind == Kind::kConversation ? "conversation" : "detailed_caption"; }

std::string to_string(Provenance p) { return p == Provenance::kExternalLlm ? "external_llm" : "offline_template"; }

Kind parse_kind(const std::string& text) {
  if (text == "conversation") return Kind::kConversation;
  if (text == "detailed_caption") return Kind::kDetailedCaption;
  throw ParseError("kind", "unknown kind '" + text + "'");
}

Provenance parse_provenance(const std::string& text) {
  if (text == "external_llm") return Provenance::kExternalLlm;
  if (text == "offline_template") return Provenance::kOfflineTemplate;
  throw ParseError("provenance", "unknown provenance '" + text + "'");
}

std::optional<std::string> validate_sample(const InstructionSample& s) {
  if (s.scene_id.empty()) return "empty scene_id";
  if (s.turns.empty()) return "no turns";
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    const auto& t = s.turns[i];
    const std::string n = std::to_string(i + 1);
    if (trim(t.instruction).empty()) return "turn " + n + " has an empty instruction";
    if (trim(t.response).empty()) return "turn " + n + " has an empty response";
    if (contains(t.instruction, prompt::kDelimiter) || contains(t.response, prompt::kDelimiter)) {
      return "turn " + n + " contains the ### delimiter";
    }
  }
  if (s.kind == Kind::kConversation && s.turns.size() < 2) {
    return "conversation has " + std::to_string(s.turns.size()) + " turn, needs at least 2";
  }
  if (s.kind == Kind::kDetailedCaption) {
    if (s.turns.size() != 1) return "detailed caption has " + std::to_string(s.turns.size()) + " turns, needs 1";
    const auto words = static_cast<int>(word_count(s.turns[0].response));
    if (words < kMinCaptionWords) {
      return "word count " + std::to_string(words) + " < " + std::to_string(kMinCaptionWords);
    }
    if (words > kMaxCaptionWords) {
      return "word count " + std::to_string(words) + " > " + std::to_string(kMaxCaptionWords);
    }
  }
  return std::nullopt;
}

nlohmann::json to_json(const InstructionSample& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back({{"instruction", t.instruction}, {"response", t.response}});
  return {{"scene_id", s.scene_id},
          {"target_object_id", s.target_object_id},
          {"kind", to_string(s.kind)},
          {"turns", turns},
          {"provenance", to_string(s.provenance)}};
}

InstructionSample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("record", "expected an object");
  InstructionSample s;
  s.scene_id = require(j, "scene_id").get<std::string>();
  const json& id = require(j, "target_object_id");
  if (!id.is_number_integer()) throw ParseError("target_object_id", "expected an integer");
  s.target_object_id = id.get<int>();
  s.kind = parse_kind(require(j, "kind").get<std::string>());
  s.provenance = parse_provenance(require(j, "provenance").get<std::string>());
  const json& turns = require(j, "turns");
  if (!turns.is_array()) throw ParseError("turns", "expected an array");
  for (const auto& t : turns) {
    s.turns.push_back({require(t, "instruction").get<std::string>(), require(t, "response").get<std::string>()});
  }
  if (auto reason = validate_sample(s)) throw ParseError("record", *reason);
  return s;
}

nlohmann::json to_json(const CaptionRecord& r) {
  return {{"scene_id", r.scene_id}, {"target_object_id", r.target_object_id}, {"captions", r.captions}};
}

CaptionRecord caption_from_json(const nlohmann::json& j) {
  CaptionRecord r;
  r.scene_id = require(j, "scene_id").get<std::string>();
  r.target_object_id = require(j, "target_object_id").get<int>();
  r.captions = require(j, "captions").get<std::vector<std::string>>();
  if (r.captions.empty()) throw ParseError("captions", "no captions");
  return r;
}

std::string serialize_corpus(const std::vector<InstructionSample>& samples) {
  std::string out;
  for (const auto& s : samples) out += to_json(s).dump() + "\n";
  return out;
}

void write_corpus(const std::vector<InstructionSample>& samples, const std::string& path) {
  write_file(path, serialize_corpus(samples));
}

std::vector<InstructionSample> parse_corpus(std::string_view text) {
  return parse_lines<InstructionSample>(text, sample_from_json);
}

std::vector<InstructionSample> read_corpus(const std::string& path) { return parse_corpus(read_file(path)); }

void write_captions(const std::vector<CaptionRecord>& records, const std::string& path) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  write_file(path, out);
}

std::vector<CaptionRecord> read_captions(const std::string& path) {
  return parse_lines<CaptionRecord>(read_file(path), caption_from_json);
}

}  // namespace scenechat::dataset
