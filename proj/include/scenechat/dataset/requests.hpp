// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "scenechat/dataset/textualize.hpp"
#include "scenechat/prompt/prompt.hpp"

namespace scenechat::dataset {

/// System prompt for detailed captions (used verbatim).
extern const std::string_view kCaptionSystemPrompt;
/// System prompt for multi-turn conversations.
extern const std::string_view kConversationSystemPrompt;

struct InContextExample {
  TextualizedScene scene;
  std::string caption;
};

/// Six hand-written caption examples.
const std::vector<InContextExample>& in_context_pool();

/// Two distinct pool entries chosen by `seed`.
std::vector<InContextExample> select_examples(std::uint64_t seed);
std::vector<InContextExample> select_examples(const std::vector<InContextExample>& pool, std::uint64_t seed);

/// System prompt, the two examples, then the scene to describe. Throws
/// InvalidInput unless exactly two examples are given.
std::string build_caption_request(const TextualizedScene& tx, const std::vector<InContextExample>& examples);

std::string build_conversation_request(const TextualizedScene& tx);

/// Trimmed caption text; throws ParseError when empty.
std::string parse_caption_response(std::string_view text);

/// "Question: ..." / "Answer: ..." pairs in order. Throws ParseError when a
/// question lacks an answer or nothing is found.
std::vector<prompt::DialogueTurn> parse_conversation_response(std::string_view text);

}  // namespace scenechat::dataset
