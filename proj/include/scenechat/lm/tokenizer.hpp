// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace scenechat::lm {

/// Word-level tokenizer with exact round trips.
///
/// Text is split into pieces: words ([A-Za-z0-9] with inner apostrophes),
/// angle-bracket tags such as "<target>" or "</scene>", runs of up to three
/// '#', and single other characters. A single space before a piece is folded
/// into it as a leading U+2581 marker; any other whitespace becomes its own
/// piece. decode(encode(s)) == s whenever every piece of s is in the vocabulary.
class Tokenizer {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr std::string_view kSpaceMarker = "\xE2\x96\x81";

  Tokenizer();

  /// Vocabulary of every piece in `corpus`, most frequent first (ties by
  /// byte order), after the four specials.
  static Tokenizer build(const std::vector<std::string>& corpus);

  /// One piece per line; the id is the zero-based line number.
  static Tokenizer load(const std::string& path);
  void save(const std::string& path) const;
  static Tokenizer from_pieces(std::vector<std::string> pieces);

  static std::vector<std::string> split(std::string_view text);

  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;
  std::string decode_one(int id) const;

  int size() const { return static_cast<int>(pieces_.size()); }
  const std::string& piece(int id) const { return pieces_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::string_view piece) const;
  bool is_special(int id) const { return id >= 0 && id <= kUnk; }
  const std::vector<std::string>& pieces() const { return pieces_; }

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace scenechat::lm
