#include <doctest.h>

#include <algorithm>
#include <string>

#include "ptrner/tokenizer.hpp"

using namespace ptrner;

namespace {

const std::string M(kWordStart);

std::vector<std::string> texts(const std::vector<Piece>& ps) {
  std::vector<std::string> out;
  for (const Piece& p : ps) out.push_back(p.text);
  return out;
}

}  // namespace

TEST_CASE("bpe training picks the most frequent pair") {
  const BpeVocab v = train_bpe({"aa", "aa", "aa", "aa", "aa"}, 1);
  REQUIRE(v.merges().size() == 1);
  CHECK(v.merges()[0] == BpeVocab::Merge{M + "a", "a"});
  CHECK(v.contains(M + "aa"));

  const BpeVocab w = train_bpe({"ab", "ab", "ac"}, 1);
  REQUIRE(w.merges().size() == 1);
  CHECK(w.merges()[0] == BpeVocab::Merge{M + "a", "b"});
}

TEST_CASE("bpe ties go to the smallest pair") {
  // (a_init, b) and (a_init, c) both occur once
  const BpeVocab v = train_bpe({"ab", "ac"}, 1);
  CHECK(v.merges()[0] == BpeVocab::Merge{M + "a", "b"});
}

TEST_CASE("zero merges is character level") {
  const BpeVocab v = train_bpe({"ab", "ba"}, 0);
  CHECK(v.merges().empty());
  CHECK(texts(encode_word(v, "ab")) == std::vector<std::string>{M + "a", "b"});
  const auto one = encode_word(v, "a");
  REQUIRE(one.size() == 1);
  CHECK(one[0].text == M + "a");
  CHECK_THROWS_AS(train_bpe({}, 3), Error);
}

TEST_CASE("single merge application") {
  const BpeVocab v = BpeVocab::from_parts({{M + "a", "a"}}, {"<unk>", M + "a", "a", "b", M + "aa"}, false);
  CHECK(texts(encode_word(v, "aab")) == std::vector<std::string>{M + "aa", "b"});
  // unknown characters map to the unknown piece
  const auto pieces = encode_word(v, "az");
  CHECK(pieces[1].id == v.unk_id());
}

TEST_CASE("word spans of a split word") {
  const BpeVocab v = BpeVocab::from_parts({}, {"<unk>", M + "x", "y", "z", M + "q"}, false);
  const TokenizedSentence s = tokenize_sentence(v, {"xyz", "q"});
  CHECK(s.n() == 4);
  CHECK(s.word_spans == std::vector<std::pair<int, int>>{{1, 3}, {4, 4}});
  CHECK(s.is_word_start == std::vector<std::uint8_t>{1, 0, 0, 1});
  CHECK(s.word_of(3) == 0);
  CHECK(detokenize(s) == std::vector<std::string>{"xyz", "q"});
}

TEST_CASE("hand merges reproduce a two-word six-piece split") {
  std::vector<BpeVocab::Merge> merges;
  std::vector<std::string> pieces{"<unk>"};
  auto chain = [&](const std::vector<std::string>& chars) {
    std::string acc = chars[0];
    for (std::size_t i = 1; i < chars.size(); ++i) {
      merges.push_back({acc, chars[i]});
      acc += chars[i];
    }
    pieces.push_back(acc);
  };
  chain({M + "l", "i", "p"});
  chain({"o", "x", "y"});
  chain({"g", "e", "n"});
  chain({"a", "s", "e"});
  chain({M + "i", "s", "o"});
  chain({"f", "o", "r", "m", "s"});
  for (const char* c : {"l", "i", "p", "o", "x", "y", "g", "e", "n", "a", "s", "f", "r", "m"}) pieces.push_back(c);
  pieces.push_back(M + "l");
  pieces.push_back(M + "i");
  const BpeVocab v = BpeVocab::from_parts(merges, pieces, false);
  const TokenizedSentence s = tokenize_sentence(v, {"lipoxygenase", "isoforms"});
  CHECK(s.pieces == std::vector<std::string>{M + "lip", "oxy", "gen", "ase", M + "iso", "forms"});
  std::vector<int> starts;
  for (int p = 1; p <= s.n(); ++p)
    if (s.starts_word(p)) starts.push_back(p);
  CHECK(starts == std::vector<int>{1, 5});
}

TEST_CASE("passthrough vocabulary") {
  Dataset ds;
  ds.sentences.push_back({{"a", "b", "a", "c"}, {}});
  const BpeVocab v = passthrough_vocab(ds);
  CHECK(v.size() == 4);  // unk + 3 words
  const TokenizedSentence s = tokenize_sentence(v, ds.sentences[0].words);
  CHECK(s.n() == 4);
  CHECK(s.word_spans == std::vector<std::pair<int, int>>{{1, 1}, {2, 2}, {3, 3}, {4, 4}});
  CHECK(std::all_of(s.is_word_start.begin(), s.is_word_start.end(), [](auto b) { return b == 1; }));
  CHECK_THROWS_AS(BpeVocab::from_parts({{M + "a", "b"}}, {"<unk>"}, true), ValidationError);
}

TEST_CASE("vocab json round trip") {
  const BpeVocab v = train_bpe({"alpha", "alpine", "beta", "alp"}, 4);
  const BpeVocab back = BpeVocab::from_json(nlohmann::json::parse(v.to_json().dump()));
  CHECK(back.merges() == v.merges());
  CHECK(back.pieces() == v.pieces());
  CHECK(texts(encode_word(back, "alpha")) == texts(encode_word(v, "alpha")));
}
