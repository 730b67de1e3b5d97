// SPDX-License-Identifier: Apache-2.0

#include "scenechat/chat/assistant.hpp"

namespace scenechat::chat {

encoder::SceneEmbeddings Assistant::embed(const scene::SceneRecord& scene, int target_id) const {
  return bundle_.encoder().encode_scene(scene, target_id);
}

lm::GenerationResult Assistant::reply(const encoder::SceneEmbeddings& embs,
                                      const std::vector<prompt::DialogueTurn>& history,
                                      const std::string& instruction) const {
  const auto seq = prompt::assemble_prompt(embs, instruction, prompt::DialogueHistory{history}, bundle_.tokenizer());
  return bundle_.lm().generate(seq, decoding_);
}

std::string Assistant::respond(const scene::SceneRecord& scene, int target_id,
                               const std::vector<prompt::DialogueTurn>& history, const std::string& instruction) {
  return reply(embed(scene, target_id), history, instruction).text;
}

}  // namespace scenechat::chat
