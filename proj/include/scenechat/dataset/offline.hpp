// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenechat/dataset/sample.hpp"
#include "scenechat/scene/scene.hpp"

namespace scenechat::dataset {

/// Instruction used for scene captioning.
inline constexpr const char* kDescribeInstruction = "Describe this object.";
/// Instruction used for detailed captions.
inline constexpr const char* kDetailedInstruction = "Describe this object in detail.";

/// Question templates of the offline conversation generator.
enum class Question { kCategory, kColor, kSize, kNearest, kCount, kFunction, kDirection };

struct QuestionAnswer {
  std::string instruction;
  std::string response;
};

/// One question about `target`, answered from the scene ground truth.
QuestionAnswer answer_question(const scene::SceneRecord& scene, int target_id, Question q);

/// `count` short lowercase descriptions of the target (category, color and
/// nearest neighbor), deterministic in `seed`.
std::vector<std::string> brief_captions(const scene::SceneRecord& scene, int target_id, std::uint64_t seed,
                                        int count = 3);

/// One CaptionRecord for every object of every scene.
std::vector<CaptionRecord> caption_corpus(const std::vector<scene::SceneRecord>& scenes, std::uint64_t seed,
                                          int captions_per_object = 3);

/// 2 or 3 turns of distinct question kinds.
InstructionSample offline_conversation(const scene::SceneRecord& scene, int target_id, std::uint64_t seed);

/// Paragraph of 150 to 200 words built from scene facts.
InstructionSample offline_detailed_caption(const scene::SceneRecord& scene, int target_id, std::uint64_t seed);

struct OfflineCounts {
  int conversations_per_scene = 1;
  int detailed_per_scene = 1;
};

/// Seeded targets per scene; samples ordered by scene, then conversations
/// before detailed captions.
std::vector<InstructionSample> generate_offline(const std::vector<scene::SceneRecord>& scenes,
                                                const OfflineCounts& counts, std::uint64_t seed);

}  // namespace scenechat::dataset
