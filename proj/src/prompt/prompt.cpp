// SPDX-License-Identifier: Apache-2.0

#include "scenechat/prompt/prompt.hpp"

#include <cmath>

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"

namespace scenechat::prompt {
namespace {

class Builder {
 public:
  explicit Builder(const lm::Tokenizer& tok) : tok_(tok) {}

  void text(std::string s, Role role) {
    TextSegment seg;
    seg.tokens = tok_.encode(s);
    seg.text = std::move(s);
    seq_.role_mask.insert(seq_.role_mask.end(), seg.tokens.size(), role);
    seq_.segments.emplace_back(std::move(seg));
  }

  void embedding(int slot) {
    seq_.segments.emplace_back(EmbeddingSegment{slot});
    seq_.role_mask.push_back(Role::kPrompt);
  }

  MixedSequence finish(nn::Matrix slots) {
    seq_.slots = std::move(slots);
    return std::move(seq_);
  }

 private:
  const lm::Tokenizer& tok_;
  MixedSequence seq_;
};

void check_instruction(std::string_view instruction) {
  if (trim(instruction).empty()) throw ValidationError("instruction must not be empty");
}

/// Renders turns; `pending` (if non-null) is an unanswered final instruction.
MixedSequence build(nn::Matrix slots, const std::vector<DialogueTurn>& turns, const std::string* pending,
                    const lm::Tokenizer& tok) {
  const int n_slots = static_cast<int>(slots.rows());
  if (n_slots < 2) throw InvalidInput("prompt needs a target and at least one other object");
  Builder b(tok);
  const std::size_t total = turns.size() + (pending ? 1 : 0);
  for (std::size_t t = 0; t < total; ++t) {
    const std::string& instruction = t < turns.size() ? turns[t].instruction : *pending;
    check_instruction(instruction);
    if (t == 0) {
      b.text("###Human: <target> ", Role::kPrompt);
      b.embedding(0);
      b.text(" </target> <scene> ", Role::kPrompt);
      for (int k = 1; k < n_slots; ++k) b.embedding(k);
      b.text(" </scene> " + instruction + " ###Assistant:", Role::kPrompt);
    } else {
      b.text("###Human: " + instruction + " ###Assistant:", Role::kPrompt);
    }
    if (t < turns.size()) {
      if (trim(turns[t].response).empty()) {
        throw ValidationError("turn " + std::to_string(t + 1) + " has an empty response");
      }
      b.text(" " + turns[t].response + std::string(kDelimiter), Role::kResponse);
    }
  }
  return b.finish(std::move(slots));
}

}  // namespace

std::size_t MixedSequence::length() const { return role_mask.size(); }

std::size_t MixedSequence::slot_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) n += std::holds_alternative<EmbeddingSegment>(s) ? 1 : 0;
  return n;
}

std::vector<int> MixedSequence::flat_ids() const {
  std::vector<int> ids;
  ids.reserve(role_mask.size());
  for (const auto& s : segments) {
    if (const auto* t = std::get_if<TextSegment>(&s)) {
      ids.insert(ids.end(), t->tokens.begin(), t->tokens.end());
    } else {
      ids.push_back(-(std::get<EmbeddingSegment>(s).slot + 1));
    }
  }
  return ids;
}

std::string MixedSequence::render() const {
  std::string out;
  for (const auto& s : segments) {
    if (const auto* t = std::get_if<TextSegment>(&s)) {
      out += t->text;
    } else {
      out += kEmbeddingPlaceholder;
    }
  }
  return out;
}

std::size_t MixedSequence::response_positions() const {
  std::size_t n = 0;
  for (Role r : role_mask) n += r == Role::kResponse ? 1 : 0;
  return n;
}

void MixedSequence::validate(int d_model) const {
  if (slots.rows() > 0 && slots.cols() != d_model) {
    throw ValidationError("embedding slots have width " + std::to_string(slots.cols()) + ", expected " +
                          std::to_string(d_model));
  }
  std::size_t flat = 0;
  for (const auto& s : segments) {
    if (const auto* t = std::get_if<TextSegment>(&s)) {
      flat += t->tokens.size();
    } else {
      const int slot = std::get<EmbeddingSegment>(s).slot;
      if (slot < 0 || slot >= slots.rows()) throw ValidationError("embedding segment refers to a missing slot");
      if (!slots.row(slot).allFinite()) throw ValidationError("embedding slot holds non-finite values");
      ++flat;
    }
  }
  if (flat != role_mask.size()) throw ValidationError("role mask length differs from sequence length");
  // Response positions must follow an "###Assistant:" marker within their turn.
  bool open = false;
  std::size_t pos = 0;
  for (const auto& s : segments) {
    if (const auto* t = std::get_if<TextSegment>(&s)) {
      for (std::size_t i = 0; i < t->tokens.size(); ++i, ++pos) {
        if (role_mask[pos] == Role::kResponse && !open) {
          throw ValidationError("response position " + std::to_string(pos) + " precedes the assistant marker");
        }
      }
      if (contains(t->text, "###Human:")) open = false;
      if (t->text.size() >= 13 && t->text.compare(t->text.size() - 13, 13, "###Assistant:") == 0) open = true;
    } else {
      if (role_mask[pos] == Role::kResponse) throw ValidationError("embedding slot marked as response");
      ++pos;
    }
  }
}

MixedSequence assemble_prompt(const encoder::SceneEmbeddings& scene_embs, std::string_view instruction,
                              const DialogueHistory& history, const lm::Tokenizer& tokenizer) {
  check_instruction(instruction);
  const std::string pending(instruction);
  return build(scene_embs.stacked(), history.turns, &pending, tokenizer);
}

MixedSequence assemble_dialogue(const encoder::SceneEmbeddings& scene_embs, const std::vector<DialogueTurn>& turns,
                                const lm::Tokenizer& tokenizer) {
  if (turns.empty()) throw InvalidInput("assemble_dialogue: no turns");
  return build(scene_embs.stacked(), turns, nullptr, tokenizer);
}

MixedSequence assemble_dialogue_layout(int other_count, int d_model, const std::vector<DialogueTurn>& turns,
                                       const lm::Tokenizer& tokenizer) {
  if (turns.empty()) throw InvalidInput("assemble_dialogue_layout: no turns");
  return build(nn::Matrix::Zero(other_count + 1, d_model), turns, nullptr, tokenizer);
}

bool response_stop_condition(std::string_view generated_text, bool eos_emitted) {
  return eos_emitted || contains(generated_text, kDelimiter);
}

bool StopScanner::feed(std::string_view chunk) {
  if (stopped_) return true;
  std::string window = tail_ + std::string(chunk);
  stopped_ = contains(window, kDelimiter);
  const std::size_t keep = kDelimiter.size() - 1;
  tail_ = window.size() > keep ? window.substr(window.size() - keep) : window;
  return stopped_;
}

std::string strip_delimiter(std::string_view generated_text) {
  const std::size_t cut = generated_text.find(kDelimiter);
  return trim(generated_text.substr(0, cut));
}

}  // namespace scenechat::prompt
