// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>

#include "scenechat/core/error.hpp"
#include "scenechat/lm/tokenizer.hpp"

using scenechat::lm::Tokenizer;

namespace {

const std::vector<std::string>& corpus() {
  static const std::vector<std::string> c{
      "###Human: <target> ", " </target> <scene> ", " </scene> Describe this object. ###Assistant:",
      " This is a brown chair, next to the table.###", "There are 3 chairs in the room.\nIt's  fine.\t(ok)",
      "trash can"};
  return c;
}

}  // namespace

TEST_CASE("split keeps tags, hash runs and marked words") {
  const auto p = Tokenizer::split("###Human: <target> x</target> ######ok");
  const std::vector<std::string> want{"###", "Human", ":", "\xE2\x96\x81<target>", "\xE2\x96\x81x", "</target>",
                                      "\xE2\x96\x81###", "###", "ok"};
  CHECK(p == want);
  CHECK(Tokenizer::split("a\n b") == std::vector<std::string>{"a", "<0x0A>", "\xE2\x96\x81" "b"});
  CHECK(Tokenizer::split("it's  x") == std::vector<std::string>{"it's", "\xE2\x96\x81", "\xE2\x96\x81x"});
}

TEST_CASE("round trip is exact on the corpus") {
  const Tokenizer tok = Tokenizer::build(corpus());
  for (const auto& s : corpus()) CHECK(tok.decode(tok.encode(s)) == s);
}

TEST_CASE("specials are never produced from plain text") {
  const Tokenizer tok = Tokenizer::build(corpus());
  for (const std::string s : {"[PAD] [BOS]", "[EOS][UNK]", "<0x0A>"}) {
    for (int id : tok.encode(s)) {
      if (id == Tokenizer::kUnk) continue;
      CHECK_FALSE(tok.is_special(id));
    }
  }
  const auto ids = tok.encode("zebra");
  CHECK(ids == std::vector<int>{Tokenizer::kUnk});
}

TEST_CASE("vocabulary is ordered by frequency and persists") {
  const Tokenizer tok = Tokenizer::build({"b a a", "a c"});
  CHECK(tok.piece(0) == "[PAD]");
  CHECK(tok.piece(4) == "\xE2\x96\x81" "a");
  const auto path = (std::filesystem::temp_directory_path() / "scenechat_vocab.txt").string();
  tok.save(path);
  const Tokenizer back = Tokenizer::load(path);
  CHECK(back.pieces() == tok.pieces());
  CHECK_THROWS_AS(Tokenizer::from_pieces({"a", "b"}), scenechat::ParseError);
}
