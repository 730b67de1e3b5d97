// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "scenechat/core/rng.hpp"
#include "scenechat/lm/tokenizer.hpp"
#include "scenechat/nn/layers.hpp"
#include "scenechat/nn/param_store.hpp"
#include "scenechat/prompt/prompt.hpp"

namespace scenechat::lm {

struct LMConfig {
  int vocab_size = 0;
  int d_model = 128;
  int n_layers = 2;
  int n_heads = 4;
  int context_length = 512;
  int ffn_mult = 4;

  void validate() const;
  nlohmann::json to_json() const;
  static LMConfig from_json(const nlohmann::json& j);
};

struct DecodingOptions {
  /// Greedy when true or when temperature <= 0; otherwise nucleus sampling.
  bool greedy = true;
  double top_p = 0.9;
  double temperature = 1.0;
  int max_new_tokens = 160;
  std::uint64_t seed = 0;
};

struct GenerationResult {
  std::string text;  // response before the delimiter, trimmed
  std::string raw;   // every decoded piece
  std::vector<int> tokens;
  bool stopped = false;  // delimiter or EOS reached before the budget ran out
};

/// Next-token targets for `seq`: position i predicts the token at i + 1 when
/// that position is a response token, otherwise -1.
std::vector<int> response_targets(const prompt::MixedSequence& seq);
/// Targets for every text token that follows another position.
std::vector<int> text_targets(const prompt::MixedSequence& seq);

/// Mean cross-entropy over response positions. Throws when there are none.
nn::Var lm_loss(const nn::Var& logits, const prompt::MixedSequence& seq);

/// What the rest of the system needs from a language model.
class LanguageBackend {
 public:
  virtual ~LanguageBackend() = default;
  virtual const Tokenizer& tokenizer() const = 0;
  virtual int d_model() const = 0;
  virtual int context_length() const = 0;
  /// Logits graph (length x vocab) with `slots` injected at embedding
  /// segments. Throws ContextOverflow when the sequence is too long.
  virtual nn::Var forward_mixed(const prompt::MixedSequence& seq, const nn::Var& slots) const = 0;
  virtual GenerationResult generate(const prompt::MixedSequence& seq, const DecodingOptions& options) const = 0;
  /// Unit-norm mean of the category's token embeddings.
  virtual nn::RowVector class_name_embedding(std::string_view category) const = 0;
};

/// Small causal pre-norm decoder with learned positions and an output head
/// tied to the token embedding table. Parameters use the "lm" group.
class ToyLM final : public LanguageBackend {
 public:
  ToyLM(const LMConfig& config, Tokenizer tokenizer, nn::ParamStore& store, Rng& rng);

  const LMConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const override { return tokenizer_; }
  int d_model() const override { return config_.d_model; }
  int context_length() const override { return config_.context_length; }

  /// `ids` as in MixedSequence::flat_ids. Keys with key_mask 0 are ignored.
  nn::Var forward(std::span<const int> ids, const nn::Var& slots, std::span<const std::uint8_t> key_mask = {}) const;
  nn::Var forward_mixed(const prompt::MixedSequence& seq, const nn::Var& slots) const override;
  /// Uses the sequence's own slot matrix.
  nn::Var forward_mixed(const prompt::MixedSequence& seq) const;

  GenerationResult generate(const prompt::MixedSequence& seq, const DecodingOptions& options) const override;

  nn::RowVector class_name_embedding(std::string_view category) const override;
  /// Differentiable in the embedding table.
  nn::Var class_name_embedding_var(std::string_view category) const;
  /// Known tokens of the category as written after a space.
  std::vector<int> class_name_tokens(std::string_view category) const;

  /// Last-position logits computed incrementally with cached keys and
  /// values; matches the corresponding row of forward().
  nn::RowVector incremental_logits(std::span<const int> ids, const nn::Matrix& slots) const;

  const nn::Var& token_embedding() const { return tok_emb_; }
  const std::vector<nn::TransformerLayer>& layers() const { return layers_; }

 private:
  struct Cache {
    std::vector<nn::Matrix> k;
    std::vector<nn::Matrix> v;
    Eigen::Index length = 0;
  };
  /// Appends rows (already embedded, without positions) to the cache and
  /// returns logits for the last appended row.
  nn::RowVector extend(Cache& cache, const nn::Matrix& rows) const;
  int pick(const nn::RowVector& logits, const DecodingOptions& options, Rng& rng) const;

  LMConfig config_;
  Tokenizer tokenizer_;
  nn::Var tok_emb_;
  nn::Var pos_emb_;
  std::vector<nn::TransformerLayer> layers_;
  nn::LayerNorm ln_f_;
};

}  // namespace scenechat::lm
