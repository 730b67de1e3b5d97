// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "scenechat/encoder/embeddings.hpp"
#include "scenechat/lm/tokenizer.hpp"
#include "scenechat/nn/tensor.hpp"

namespace scenechat::prompt {

inline constexpr std::string_view kDelimiter = "###";
inline constexpr std::string_view kEmbeddingPlaceholder = "[EMB]";

enum class Role : std::uint8_t { kPrompt = 0, kResponse = 1 };

struct TextSegment {
  std::string text;
  std::vector<int> tokens;
};

/// One injected vector; `slot` indexes MixedSequence::slots.
struct EmbeddingSegment {
  int slot = 0;
};

using Segment = std::variant<TextSegment, EmbeddingSegment>;

/// Interleaved token runs and raw embedding vectors.
///
/// `role_mask[i]` is kResponse when flattened position i holds a token the
/// model is trained to produce; the loss for it is read from the logits at
/// position i - 1.
struct MixedSequence {
  std::vector<Segment> segments;
  nn::Matrix slots;  // slot_count x d_model
  std::vector<Role> role_mask;

  std::size_t length() const;
  std::size_t slot_count() const;
  /// Token ids per position; embedding slot k appears as -(k + 1).
  std::vector<int> flat_ids() const;
  /// Text with "[EMB]" for each embedding segment.
  std::string render() const;
  std::size_t response_positions() const;
  /// Throws ValidationError when an invariant does not hold.
  void validate(int d_model) const;
};

struct DialogueTurn {
  std::string instruction;
  std::string response;
  bool operator==(const DialogueTurn&) const = default;
};

struct DialogueHistory {
  std::vector<DialogueTurn> turns;
};

/// Object-centric prompt for the next assistant reply. The first turn carries
/// the target embedding in a <target> slot and the other objects in a
/// <scene> slot; completed turns of `history` precede the new instruction,
/// and their responses are marked as response positions.
MixedSequence assemble_prompt(const encoder::SceneEmbeddings& scene_embs, std::string_view instruction,
                              const DialogueHistory& history, const lm::Tokenizer& tokenizer);

/// Full training sequence: every turn is complete and each response
/// (including its closing delimiter) is marked for the loss.
MixedSequence assemble_dialogue(const encoder::SceneEmbeddings& scene_embs, const std::vector<DialogueTurn>& turns,
                                const lm::Tokenizer& tokenizer);

/// Same layout with `other_count + 1` zero slots of width `d_model`, for
/// callers that supply slot vectors separately.
MixedSequence assemble_dialogue_layout(int other_count, int d_model, const std::vector<DialogueTurn>& turns,
                                       const lm::Tokenizer& tokenizer);

/// True when `generated_text` contains the turn delimiter or `eos_emitted`.
bool response_stop_condition(std::string_view generated_text, bool eos_emitted = false);

/// Incremental form of response_stop_condition for streamed chunks.
class StopScanner {
 public:
  /// Returns true once the delimiter has appeared across all chunks so far.
  bool feed(std::string_view chunk);
  bool stopped() const { return stopped_; }

 private:
  std::string tail_;
  bool stopped_ = false;
};

/// Response text before the first delimiter, without surrounding whitespace.
std::string strip_delimiter(std::string_view generated_text);

}  // namespace scenechat::prompt
