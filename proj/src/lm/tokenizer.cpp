// SPDX-License-Identifier: Apache-2.0

#include "scenechat/lm/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>

#include "scenechat/core/error.hpp"

namespace scenechat::lm {
namespace {

const std::vector<std::string>& specials() {
  static const std::vector<std::string> kSpecials = {"[PAD]", "[BOS]", "[EOS]", "[UNK]"};
  return kSpecials;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

/// Length of the piece starting at text[i] (never zero).
std::size_t piece_length(std::string_view text, std::size_t i) {
  const auto c = static_cast<unsigned char>(text[i]);
  if (is_word_char(c)) {
    std::size_t j = i + 1;
    while (j < text.size()) {
      const auto d = static_cast<unsigned char>(text[j]);
      if (is_word_char(d)) {
        ++j;
      } else if (d == '\'' && j + 1 < text.size() && is_word_char(static_cast<unsigned char>(text[j + 1]))) {
        j += 2;
      } else {
        break;
      }
    }
    return j - i;
  }
  if (c == '<') {
    std::size_t j = i + 1;
    if (j < text.size() && text[j] == '/') ++j;
    const std::size_t name_start = j;
    while (j < text.size() && (std::isalpha(static_cast<unsigned char>(text[j])) || text[j] == '_')) ++j;
    if (j > name_start && j < text.size() && text[j] == '>') return j + 1 - i;
    return 1;
  }
  if (c == '#') {
    std::size_t j = i;
    while (j < text.size() && j < i + 3 && text[j] == '#') ++j;
    return j - i;
  }
  return std::min(utf8_length(c), text.size() - i);
}

std::string whitespace_piece(char c) {
  if (c == ' ') return std::string(Tokenizer::kSpaceMarker);
  char buf[8];
  std::snprintf(buf, sizeof(buf), "<0x%02X>", static_cast<unsigned>(static_cast<unsigned char>(c)));
  return buf;
}

}  // namespace

Tokenizer::Tokenizer() {
  for (const auto& s : specials()) {
    index_.emplace(s, static_cast<int>(pieces_.size()));
    pieces_.push_back(s);
  }
}

std::vector<std::string> Tokenizer::split(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (c == ' ' && i + 1 < text.size() && !std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        const std::size_t len = piece_length(text, i + 1);
        out.push_back(std::string(kSpaceMarker) + std::string(text.substr(i + 1, len)));
        i += 1 + len;
      } else {
        out.push_back(whitespace_piece(c));
        ++i;
      }
      continue;
    }
    const std::size_t len = piece_length(text, i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus) {
  std::map<std::string, long> counts;
  for (const auto& s : corpus) {
    for (auto& p : split(s)) ++counts[p];
  }
  std::vector<std::pair<std::string, long>> ordered(counts.begin(), counts.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Tokenizer tok;
  for (auto& [piece, n] : ordered) {
    if (tok.index_.count(piece)) continue;
    tok.index_.emplace(piece, static_cast<int>(tok.pieces_.size()));
    tok.pieces_.push_back(piece);
  }
  return tok;
}

Tokenizer Tokenizer::from_pieces(std::vector<std::string> pieces) {
  if (pieces.size() < specials().size() ||
      !std::equal(specials().begin(), specials().end(), pieces.begin())) {
    throw ParseError("vocabulary", "first four entries must be the special tokens");
  }
  Tokenizer tok;
  tok.pieces_.clear();
  tok.index_.clear();
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!tok.index_.emplace(pieces[i], static_cast<int>(i)).second) {
      throw ParseError("vocabulary line " + std::to_string(i + 1), "duplicate piece");
    }
  }
  tok.pieces_ = std::move(pieces);
  return tok;
}

Tokenizer Tokenizer::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFound("cannot open vocabulary " + path);
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) pieces.push_back(line);
  return from_pieces(std::move(pieces));
}

void Tokenizer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& p : pieces_) out << p << '\n';
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
  std::vector<int> ids;
  for (const auto& p : split(text)) {
    auto it = index_.find(p);
    ids.push_back(it == index_.end() ? kUnk : it->second);
  }
  return ids;
}

std::string Tokenizer::decode_one(int id) const {
  if (id == kPad || id == kBos || id == kEos) return {};
  const std::string& p = piece(id);
  if (id == kUnk) return p;
  if (p.rfind(kSpaceMarker, 0) == 0) return " " + p.substr(kSpaceMarker.size());
  if (p.size() == 6 && p.rfind("<0x", 0) == 0 && p.back() == '>') {
    return std::string(1, static_cast<char>(std::stoi(p.substr(3, 2), nullptr, 16)));
  }
  return p;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) out += decode_one(id);
  return out;
}

std::optional<int> Tokenizer::find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace scenechat::lm
