// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scenechat/prompt/prompt.hpp"

namespace scenechat::dataset {

enum class Kind { kConversation, kDetailedCaption };
enum class Provenance { kExternalLlm, kOfflineTemplate };

std::string to_string(Kind kind);
std::string to_string(Provenance provenance);
Kind parse_kind(const std::string& text);
Provenance parse_provenance(const std::string& text);

inline constexpr int kMinCaptionWords = 150;
inline constexpr int kMaxCaptionWords = 200;

struct InstructionSample {
  std::string scene_id;
  int target_object_id = 0;
  Kind kind = Kind::kConversation;
  std::vector<prompt::DialogueTurn> turns;
  Provenance provenance = Provenance::kOfflineTemplate;

  bool operator==(const InstructionSample&) const = default;
};

/// Short reference description of one object, used for scene captioning.
struct CaptionRecord {
  std::string scene_id;
  int target_object_id = 0;
  std::vector<std::string> captions;

  bool operator==(const CaptionRecord&) const = default;
};

/// First violated invariant, e.g. "word count 120 < 150"; nullopt when valid.
/// The word window applies to every detailed caption.
std::optional<std::string> validate_sample(const InstructionSample& sample);

nlohmann::json to_json(const InstructionSample& sample);
/// Throws ParseError on schema violations.
InstructionSample sample_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CaptionRecord& record);
CaptionRecord caption_from_json(const nlohmann::json& j);

/// One compact JSON record per line.
std::string serialize_corpus(const std::vector<InstructionSample>& samples);
void write_corpus(const std::vector<InstructionSample>& samples, const std::string& path);
/// Throws ParseError("line N", ...) on the first malformed or invalid line.
std::vector<InstructionSample> parse_corpus(std::string_view text);
std::vector<InstructionSample> read_corpus(const std::string& path);

void write_captions(const std::vector<CaptionRecord>& records, const std::string& path);
std::vector<CaptionRecord> read_captions(const std::string& path);

}  // namespace scenechat::dataset
