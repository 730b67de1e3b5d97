// SPDX-License-Identifier: Apache-2.0

#include "scenechat/lm/lm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "scenechat/core/error.hpp"

namespace scenechat::lm {
namespace {

nn::Matrix layer_norm_values(const nn::Matrix& x, const nn::LayerNorm& ln) {
  nn::Matrix out(x.rows(), x.cols());
  const double inv_d = 1.0 / static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() * inv_d;
    const double var = (x.row(i).array() - mean).square().sum() * inv_d;
    const double inv_std = 1.0 / std::sqrt(var + 1e-5);
    out.row(i) = ((x.row(i).array() - mean) * inv_std * ln.gamma.value().row(0).array() +
                  ln.beta.value().row(0).array())
                     .matrix();
  }
  return out;
}

nn::Matrix linear_values(const nn::Matrix& x, const nn::Linear& l) {
  nn::Matrix out = x * l.weight.value();
  out.rowwise() += l.bias.value().row(0);
  return out;
}

void check_length(std::size_t n, int context_length) {
  if (n > static_cast<std::size_t>(context_length)) {
    throw ContextOverflow("sequence of " + std::to_string(n) + " positions exceeds the context length " +
                          std::to_string(context_length));
  }
}

}  // namespace

void LMConfig::validate() const {
  if (vocab_size <= 4) throw ValidationError("vocab_size must exceed the special tokens");
  if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || context_length <= 0 || ffn_mult <= 0) {
    throw ValidationError("LM sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ValidationError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                          std::to_string(n_heads));
  }
}

nlohmann::json LMConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"d_model", d_model},           {"n_layers", n_layers},
          {"n_heads", n_heads},       {"context_length", context_length}, {"ffn_mult", ffn_mult}};
}

LMConfig LMConfig::from_json(const nlohmann::json& j) {
  LMConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.context_length = j.value("context_length", c.context_length);
  c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
  return c;
}

std::vector<int> response_targets(const prompt::MixedSequence& seq) {
  const std::vector<int> ids = seq.flat_ids();
  std::vector<int> targets(ids.size(), -1);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (seq.role_mask[i] == prompt::Role::kResponse && ids[i] >= 0) targets[i - 1] = ids[i];
  }
  return targets;
}

std::vector<int> text_targets(const prompt::MixedSequence& seq) {
  const std::vector<int> ids = seq.flat_ids();
  std::vector<int> targets(ids.size(), -1);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    if (ids[i] >= 0) targets[i - 1] = ids[i];
  }
  return targets;
}

nn::Var lm_loss(const nn::Var& logits, const prompt::MixedSequence& seq) {
  if (static_cast<std::size_t>(logits.rows()) != seq.length()) {
    throw InvalidInput("lm_loss: logits rows differ from sequence length");
  }
  const std::vector<int> targets = response_targets(seq);
  if (std::all_of(targets.begin(), targets.end(), [](int t) { return t < 0; })) {
    throw InvalidInput("lm_loss: sequence has no response positions");
  }
  return nn::cross_entropy(logits, targets);
}

ToyLM::ToyLM(const LMConfig& config, Tokenizer tokenizer, nn::ParamStore& store, Rng& rng)
    : config_(config), tokenizer_(std::move(tokenizer)) {
  if (config_.vocab_size == 0) config_.vocab_size = tokenizer_.size();
  config_.validate();
  if (config_.vocab_size != tokenizer_.size()) {
    throw ValidationError("vocab_size " + std::to_string(config_.vocab_size) + " differs from the tokenizer (" +
                          std::to_string(tokenizer_.size()) + ")");
  }
  const int d = config_.d_model;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  tok_emb_ = store.add("lm.tok_emb", nn::normal_matrix(config_.vocab_size, d, sd, rng));
  pos_emb_ = store.add("lm.pos_emb", nn::normal_matrix(config_.context_length, d, 0.5 * sd, rng));
  for (int i = 0; i < config_.n_layers; ++i) {
    layers_.push_back(nn::TransformerLayer::create(store, "lm.layer" + std::to_string(i), d, config_.n_heads,
                                                   config_.ffn_mult, true, sd, rng));
  }
  ln_f_ = nn::LayerNorm::create(store, "lm.ln_f", d);
}

nn::Var ToyLM::forward(std::span<const int> ids, const nn::Var& slots, std::span<const std::uint8_t> key_mask) const {
  if (ids.empty()) throw InvalidInput("forward: empty sequence");
  check_length(ids.size(), config_.context_length);
  const auto n = static_cast<Eigen::Index>(ids.size());
  nn::Var h = nn::add(nn::mix_rows(tok_emb_, ids, slots), nn::slice_rows(pos_emb_, 0, n));
  for (const auto& layer : layers_) h = layer(h, key_mask);
  return nn::matmul_nt(ln_f_(h), tok_emb_);
}

nn::Var ToyLM::forward_mixed(const prompt::MixedSequence& seq, const nn::Var& slots) const {
  seq.validate(config_.d_model);
  if (slots.defined() && slots.cols() != config_.d_model) {
    throw InvalidInput("forward_mixed: slot width differs from d_model");
  }
  const std::vector<int> ids = seq.flat_ids();
  return forward(ids, slots);
}

nn::Var ToyLM::forward_mixed(const prompt::MixedSequence& seq) const {
  return forward_mixed(seq, nn::Var::constant(seq.slots));
}

std::vector<int> ToyLM::class_name_tokens(std::string_view category) const {
  std::vector<int> ids;
  for (int id : tokenizer_.encode(" " + std::string(category))) {
    if (id != Tokenizer::kUnk) ids.push_back(id);
  }
  if (ids.empty()) throw InvalidInput("category '" + std::string(category) + "' has no known tokens");
  return ids;
}

nn::Var ToyLM::class_name_embedding_var(std::string_view category) const {
  const std::vector<int> ids = class_name_tokens(category);
  return nn::l2_normalize_rows(nn::mean_rows(nn::gather_rows(tok_emb_, ids)));
}

nn::RowVector ToyLM::class_name_embedding(std::string_view category) const {
  const std::vector<int> ids = class_name_tokens(category);
  nn::RowVector y = nn::RowVector::Zero(config_.d_model);
  for (int id : ids) y += tok_emb_.value().row(id);
  y /= static_cast<double>(ids.size());
  const double norm = y.norm();
  if (norm == 0.0) throw InvalidInput("category '" + std::string(category) + "' has a zero embedding");
  return y / norm;
}

nn::RowVector ToyLM::extend(Cache& cache, const nn::Matrix& rows) const {
  const Eigen::Index m = rows.rows();
  const Eigen::Index start = cache.length;
  check_length(static_cast<std::size_t>(start + m), config_.context_length);
  if (cache.k.empty()) {
    cache.k.assign(layers_.size(), nn::Matrix(0, config_.d_model));
    cache.v.assign(layers_.size(), nn::Matrix(0, config_.d_model));
  }
  nn::Matrix x = rows + pos_emb_.value().middleRows(start, m);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const nn::Matrix a = layer_norm_values(x, layer.ln1);
    const nn::Matrix q = linear_values(a, layer.wq);
    nn::Matrix& kc = cache.k[l];
    nn::Matrix& vc = cache.v[l];
    kc.conservativeResize(start + m, Eigen::NoChange);
    vc.conservativeResize(start + m, Eigen::NoChange);
    kc.bottomRows(m) = linear_values(a, layer.wk);
    vc.bottomRows(m) = linear_values(a, layer.wv);
    nn::AttentionOptions opts;
    opts.heads = layer.heads;
    opts.causal = true;
    const auto probs = nn::attention_probabilities(q, kc, opts);
    const Eigen::Index dh = config_.d_model / layer.heads;
    nn::Matrix att(m, config_.d_model);
    for (int h = 0; h < layer.heads; ++h) {
      att.middleCols(h * dh, dh).noalias() = probs[static_cast<std::size_t>(h)] * vc.middleCols(h * dh, dh);
    }
    x += linear_values(att, layer.wo);
    const nn::Matrix b = layer_norm_values(x, layer.ln2);
    nn::Matrix hidden = linear_values(b, layer.fc1);
    hidden = hidden.unaryExpr([](double v) { return nn::gelu_value(v); });
    x += linear_values(hidden, layer.fc2);
  }
  cache.length = start + m;
  const nn::Matrix last = layer_norm_values(x.bottomRows(1), ln_f_);
  return last * tok_emb_.value().transpose();
}

nn::RowVector ToyLM::incremental_logits(std::span<const int> ids, const nn::Matrix& slots) const {
  Cache cache;
  nn::RowVector out;
  for (int id : ids) {
    nn::Matrix row = id >= 0 ? nn::Matrix(tok_emb_.value().row(id)) : nn::Matrix(slots.row(-id - 1));
    out = extend(cache, row);
  }
  return out;
}

int ToyLM::pick(const nn::RowVector& logits, const DecodingOptions& options, Rng& rng) const {
  const Eigen::Index v = logits.size();
  auto banned = [](Eigen::Index id) {
    return id == Tokenizer::kPad || id == Tokenizer::kBos || id == Tokenizer::kUnk;
  };
  if (options.greedy || options.temperature <= 0.0) {
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < v; ++i) {
      if (!banned(i) && (best < 0 || logits(i) > logits(best))) best = i;
    }
    return static_cast<int>(best);
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < v; ++i) {
    if (!banned(i)) mx = std::max(mx, logits(i));
  }
  std::vector<double> p(static_cast<std::size_t>(v), 0.0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < v; ++i) {
    if (banned(i)) continue;
    p[static_cast<std::size_t>(i)] = std::exp((logits(i) - mx) / options.temperature);
    total += p[static_cast<std::size_t>(i)];
  }
  std::vector<int> order(static_cast<std::size_t>(v));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[a] > p[b]; });
  const double top_p = std::clamp(options.top_p, 1e-12, 1.0);
  double kept = 0.0;
  std::size_t count = 0;
  while (count < order.size() && (count == 0 || kept < top_p * total)) {
    kept += p[static_cast<std::size_t>(order[count])];
    ++count;
  }
  double u = rng.uniform() * kept;
  for (std::size_t i = 0; i < count; ++i) {
    u -= p[static_cast<std::size_t>(order[i])];
    if (u < 0.0) return order[i];
  }
  return order[count - 1];
}

GenerationResult ToyLM::generate(const prompt::MixedSequence& seq, const DecodingOptions& options) const {
  if (options.max_new_tokens < 1) throw InvalidInput("max_new_tokens must be at least 1");
  seq.validate(config_.d_model);
  const std::vector<int> ids = seq.flat_ids();
  if (ids.empty()) throw InvalidInput("generate: empty prompt");
  check_length(ids.size(), config_.context_length);

  nn::Matrix rows(static_cast<Eigen::Index>(ids.size()), config_.d_model);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) =
        ids[i] >= 0 ? tok_emb_.value().row(ids[i]) : seq.slots.row(-ids[i] - 1);
  }
  Cache cache;
  nn::RowVector logits = extend(cache, rows);
  Rng rng(options.seed);
  GenerationResult result;
  prompt::StopScanner scanner;
  for (int step = 0; step < options.max_new_tokens; ++step) {
    const int token = pick(logits, options, rng);
    result.tokens.push_back(token);
    if (token == Tokenizer::kEos) {
      result.stopped = true;
      break;
    }
    const std::string piece = tokenizer_.decode_one(token);
    result.raw += piece;
    if (scanner.feed(piece)) {
      result.stopped = true;
      break;
    }
    if (step + 1 == options.max_new_tokens) break;
    logits = extend(cache, tok_emb_.value().row(token));
  }
  result.text = prompt::strip_delimiter(result.raw);
  return result;
}

}  // namespace scenechat::lm
