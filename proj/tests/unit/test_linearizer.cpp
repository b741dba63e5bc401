#include <doctest.h>

#include <algorithm>
#include <random>

#include "ptrner/linearizer.hpp"
#include "ptrner/synth.hpp"

using namespace ptrner;

namespace {

Entity ent(std::vector<Fragment> f, std::string tag) { return Entity{std::move(f), std::move(tag)}; }

TokenizedSentence plain(int words) {
  Dataset ds;
  RawSentence s;
  for (int i = 0; i < words; ++i) s.words.push_back("w" + std::to_string(i));
  ds.sentences.push_back(s);
  return tokenize_sentence(passthrough_vocab(ds), s.words);
}

// Words whose piece counts are given, built from a character-level vocab.
TokenizedSentence split(const std::vector<int>& piece_counts) {
  std::vector<std::string> words;
  for (int c : piece_counts) words.push_back(std::string(static_cast<std::size_t>(c), 'a'));
  const BpeVocab v = train_bpe({"a"}, 0);
  return tokenize_sentence(v, words);
}

const std::vector<std::string> G3{"PER", "LOC", "FAC"};

}  // namespace

TEST_CASE("three schemes on one entity") {
  const TokenizedSentence s = plain(4);
  const EntitySet es{ent({{0, 2}}, "PER")};
  CHECK(linearize(s, es, Scheme::Span, G3).indexes == std::vector<int>{1, 3, 5});
  CHECK(linearize(s, es, Scheme::Word, G3).indexes == std::vector<int>{1, 2, 3, 5});
  CHECK(linearize(s, es, Scheme::Bpe, G3).indexes == std::vector<int>{1, 2, 3, 5});
  CHECK(linearize(s, {}, Scheme::Word, G3).indexes.empty());
  CHECK(linearize(s, {ent({{0, 0}, {2, 2}}, "PER")}, Scheme::Span, G3).indexes == std::vector<int>{1, 1, 3, 3, 5});
  CHECK_THROWS_AS(linearize(s, {ent({{0, 0}}, "ORG")}, Scheme::Span, G3), ValidationError);
}

TEST_CASE("schemes over split words") {
  // word pieces: [1,2] [3] [4,5,6]
  const TokenizedSentence s = split({2, 1, 3});
  const EntitySet es{ent({{0, 0}, {2, 2}}, "LOC")};
  CHECK(linearize(s, es, Scheme::Span, G3).indexes == std::vector<int>{1, 2, 4, 6, 8});
  CHECK(linearize(s, es, Scheme::Word, G3).indexes == std::vector<int>{1, 4, 8});
  CHECK(linearize(s, es, Scheme::Bpe, G3).indexes == std::vector<int>{1, 2, 4, 5, 6, 8});
}

TEST_CASE("entity ordering") {
  const TokenizedSentence s = plain(4);
  EntitySet a = sort_entities({ent({{2, 2}}, "PER"), ent({{0, 0}}, "PER")}, s, Scheme::Word, G3);
  CHECK(a[0].fragments[0].start == 0);
  EntitySet b = sort_entities({ent({{0, 2}}, "PER"), ent({{0, 0}}, "LOC")}, s, Scheme::Word, G3);
  CHECK(b[0].tag == "LOC");
  EntitySet c = sort_entities({ent({{1, 1}}, "LOC"), ent({{1, 1}}, "PER")}, s, Scheme::Span, G3);
  CHECK(c[0].tag == "PER");
}

TEST_CASE("decoding follows the printed algorithm") {
  const std::vector<std::string> dis{"<dis>"};
  auto d = decode_indices(TargetSequence{{3, 4, 5, 7}, 6, 1}, dis);
  REQUIRE(d.size() == 1);
  CHECK(d[0] == DecodedEntity{{3, 4, 5}, "<dis>"});
  CHECK(decode_indices(TargetSequence{{}, 6, 1}, dis).empty());
  d = decode_indices(TargetSequence{{5, 1, 2, 5}, 4, 1}, {"PER"});
  REQUIRE(d.size() == 1);
  CHECK(d[0] == DecodedEntity{{1, 2}, "PER"});
  // trailing pointers with no tag are dropped but counted
  const TargetSequence dangling{{1, 5, 2, 3}, 4, 1};
  CHECK(decode_indices(dangling, {"PER"}).size() == 1);
  CHECK(trailing_pointer_count(dangling) == 2);
}

TEST_CASE("validity verdicts") {
  const TokenizedSentence s = split({2, 1});  // starts {1, 3}
  CHECK(validate_entity({{1, 2}, "X"}, Scheme::Word, s) == Verdict::E1);
  CHECK(validate_entity({{3, 2}, "X"}, Scheme::Word, s) == Verdict::E2);
  CHECK(validate_entity({{3, 2}, "X"}, Scheme::Bpe, s) == Verdict::E2);
  CHECK(validate_entity({{1, 3}, "X"}, Scheme::Word, s) == Verdict::Valid);
  CHECK(validate_entity({{1, 2}, "X"}, Scheme::Bpe, s) == Verdict::Valid);
  // span: a start must open a word; a single-piece fragment repeats its index
  CHECK(validate_entity({{2, 3}, "X"}, Scheme::Span, s) == Verdict::E1);
  CHECK(validate_entity({{3, 3}, "X"}, Scheme::Span, s) == Verdict::Valid);
  CHECK(validate_entity({{1, 1, 3, 3}, "X"}, Scheme::Span, s) == Verdict::Valid);
  CHECK(validate_entity({{3, 3, 1, 2}, "X"}, Scheme::Span, s) == Verdict::E2);
  // an end inside a word: lenient snaps, strict rejects
  CHECK(validate_entity({{1, 1}, "X"}, Scheme::Span, s) == Verdict::Valid);
  CHECK(validate_entity({{1, 1}, "X"}, Scheme::Span, s, SpanEndPolicy::Strict) == Verdict::E1);
  CHECK(to_fragments({{1, 1}, "X"}, Scheme::Span, s)->fragments == std::vector<Fragment>{{0, 0}});
}

TEST_CASE("fragment recovery") {
  const TokenizedSentence p = plain(3);
  CHECK(to_fragments({{1, 3}, "X"}, Scheme::Span, p)->fragments == std::vector<Fragment>{{0, 2}});
  CHECK(to_fragments({{1, 1, 3, 3}, "X"}, Scheme::Span, p)->fragments == std::vector<Fragment>{{0, 0}, {2, 2}});
  CHECK_FALSE(to_fragments({{1, 1, 3}, "X"}, Scheme::Span, p).has_value());
  const TokenizedSentence s = split({3, 1, 1});  // starts {1, 4, 5}
  CHECK(to_fragments({{1, 5}, "X"}, Scheme::Word, s)->fragments == std::vector<Fragment>{{0, 0}, {2, 2}});
  CHECK(to_fragments({{1, 4}, "X"}, Scheme::Word, s)->fragments == std::vector<Fragment>{{0, 1}});
  CHECK_FALSE(to_fragments({{1, 2}, "X"}, Scheme::Bpe, s).has_value());
  CHECK(to_fragments({{1, 2, 3, 5}, "X"}, Scheme::Bpe, s)->fragments == std::vector<Fragment>{{0, 0}, {2, 2}});
}

TEST_CASE("dedupe") {
  const Entity a = ent({{0, 0}}, "A"), b = ent({{1, 1}}, "B");
  CHECK(dedupe({a, a}) == std::pair<EntitySet, int>{{a}, 1});
  CHECK(dedupe({a, b}) == std::pair<EntitySet, int>{{a, b}, 0});
  CHECK(dedupe({a, b, a, a}) == std::pair<EntitySet, int>{{a, b}, 2});
}

TEST_CASE("postprocess counts each failure class") {
  const TokenizedSentence s = split({2, 1});
  const std::vector<std::string> g{"A"};
  // n = 3, tag A = 4: [1,2] -> E1, [3,1] -> E2, [1] twice -> one E3, trailing 3
  const Postprocessed pp = postprocess(TargetSequence{{1, 2, 4, 3, 1, 4, 1, 4, 1, 4, 3}, 3, 1}, s, Scheme::Word, g);
  CHECK(pp.invalid.e1 == 1);
  CHECK(pp.invalid.e2 == 1);
  CHECK(pp.invalid.e3 == 1);
  CHECK(pp.invalid.truncated == 1);
  CHECK(pp.invalid.raw == 4);
  CHECK(pp.entities == EntitySet{ent({{0, 0}}, "A")});
}

TEST_CASE("round trip over random sentences, vocabularies and schemes") {
  std::mt19937_64 rng(23);
  const std::vector<std::string> tags{"A", "B", "C"};
  int entities = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const RawSentence raw = fuzz_sentence(rng, 10, tags);
    const BpeVocab v = train_bpe(raw.words, static_cast<int>(uniform_below(rng, 12)));
    const TokenizedSentence s = tokenize_sentence(v, raw.words);
    EntitySet want = raw.entities;
    std::sort(want.begin(), want.end());
    entities += static_cast<int>(want.size());
    for (Scheme scheme : {Scheme::Span, Scheme::Bpe, Scheme::Word}) {
      const TargetSequence seq = linearize(s, raw.entities, scheme, tags);
      for (const Entity& e : raw.entities) {
        const int expect = scheme == Scheme::Span  ? 2 * static_cast<int>(e.fragments.size()) + 1
                           : scheme == Scheme::Word ? e.word_count() + 1
                                                    : static_cast<int>(entity_pointers(s, e, Scheme::Bpe).size()) + 1;
        CHECK(block_length(s, e, scheme) == expect);
      }
      const Postprocessed pp = postprocess(seq, s, scheme, tags, SpanEndPolicy::Strict);
      EntitySet got = pp.entities;
      std::sort(got.begin(), got.end());
      CHECK(got == want);
      CHECK(pp.invalid.e1 + pp.invalid.e2 + pp.invalid.e3 + pp.invalid.truncated == 0);
    }
  }
  CHECK(entities > 300);
}

TEST_CASE("word and bpe agree under a passthrough vocabulary") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const RawSentence raw = fuzz_sentence(rng, 8, {"A", "B"});
    Dataset ds;
    ds.sentences.push_back(raw);
    const TokenizedSentence s = tokenize_sentence(passthrough_vocab(ds), raw.words);
    CHECK(linearize(s, raw.entities, Scheme::Word, {"A", "B"}).indexes ==
          linearize(s, raw.entities, Scheme::Bpe, {"A", "B"}).indexes);
  }
}
