#include <doctest.h>

#include <cmath>
#include <random>

#include "ptrner/generator.hpp"

using namespace ptrner;

namespace {

ModelConfig config(int pieces, int tags) {
  ModelConfig c;
  c.d = 16;
  c.enc_layers = 1;
  c.dec_layers = 1;
  c.heads = 2;
  c.ffn = 24;
  c.num_pieces = pieces;
  c.num_tags = tags;
  c.max_positions = 64;
  return c;
}

std::vector<int> random_source(std::mt19937_64& rng, const ModelConfig& c, int n) {
  std::vector<int> t;
  for (int i = 0; i < n; ++i) t.push_back(c.piece_token(static_cast<int>(rng() % c.num_pieces)));
  return t;
}

// Teacher-forced sum of log-probabilities of `indexes`, plus eos when finished.
double replay(const PointerModel& m, const EncodedSource& src, const std::vector<int>& indexes, bool finished) {
  const Matrix keys = pointer_keys(m, src);
  double total = 0.0;
  std::vector<int> prefix;
  for (std::size_t t = 0; t <= indexes.size(); ++t) {
    if (t == indexes.size() && !finished) break;
    const auto lp = pointer_log_distribution(keys, decode_step(m, src, prefix));
    total += lp[t == indexes.size() ? kEosClass : indexes[t]];
    if (t < indexes.size()) prefix.push_back(indexes[t]);
  }
  return total;
}

}  // namespace

TEST_CASE("beam of one is greedy") {
  std::mt19937_64 rng(1);
  const ModelConfig c = config(12, 3);
  for (int seed = 0; seed < 4; ++seed) {
    const PointerModel m = make_pointer_model(c, seed);
    for (int s = 0; s < 10; ++s) {
      const EncodedSource src = encode(m, random_source(rng, c, 2 + static_cast<int>(rng() % 8)));
      GenConfig g;
      const Generation a = greedy(m, src, g);
      const Generation b = beam_search(m, src, g);
      CHECK(a.sequence.indexes == b.sequence.indexes);
      CHECK(a.score == b.score);
      CHECK(generate(m, src, g).sequence.indexes == a.sequence.indexes);
    }
  }
}

TEST_CASE("scores equal the teacher-forced log-probability") {
  std::mt19937_64 rng(2);
  const ModelConfig c = config(12, 3);
  const PointerModel m = make_pointer_model(c, 5);
  for (int s = 0; s < 10; ++s) {
    const EncodedSource src = encode(m, random_source(rng, c, 3 + static_cast<int>(rng() % 6)));
    for (int beam : {1, 3}) {
      GenConfig g;
      g.beam = beam;
      g.max_length = 6;
      const Generation gen = generate(m, src, g);
      CHECK(std::abs(gen.score - replay(m, src, gen.sequence.indexes, gen.finished)) <= 1e-9);
      CHECK(static_cast<int>(gen.sequence.indexes.size()) <= 6);
      for (int y : gen.sequence.indexes) CHECK((y >= 1 && y <= gen.sequence.n + gen.sequence.l));
    }
  }
}

TEST_CASE("wider beams never score below greedy") {
  std::mt19937_64 rng(3);
  const ModelConfig c = config(12, 3);
  const PointerModel m = make_pointer_model(c, 6);
  for (int s = 0; s < 15; ++s) {
    const EncodedSource src = encode(m, random_source(rng, c, 2 + static_cast<int>(rng() % 6)));
    GenConfig g;
    g.max_length = 8;
    const double base = greedy(m, src, g).score;
    for (int beam : {2, 4, 6}) {
      g.beam = beam;
      CHECK(beam_search(m, src, g).score >= base);
    }
  }
}

TEST_CASE("an unlimited-width beam finds the exhaustive optimum") {
  std::mt19937_64 rng(4);
  const ModelConfig c = config(5, 1);
  const PointerModel m = make_pointer_model(c, 7);
  const EncodedSource src = encode(m, random_source(rng, c, 3));
  const Matrix keys = pointer_keys(m, src);
  const int classes = 1 + 3 + 1;
  // every sequence of at most two indexes, finished or cut at the cap
  double best = -INFINITY;
  std::vector<int> best_seq;
  const auto first = pointer_log_distribution(keys, decode_step(m, src, {}));
  auto consider = [&](double score, std::vector<int> seq) {
    if (score > best || (score == best && seq < best_seq)) {
      best = score;
      best_seq = std::move(seq);
    }
  };
  consider(first[kEosClass], {});
  for (int a = 1; a < classes; ++a) {
    const auto second = pointer_log_distribution(keys, decode_step(m, src, {a}));
    consider(first[a] + second[kEosClass], {a});
    for (int b = 1; b < classes; ++b) consider(first[a] + second[b], {a, b});
  }
  GenConfig g;
  g.beam = classes * classes;
  g.max_length = 2;
  const Generation gen = beam_search(m, src, g);
  CHECK(gen.sequence.indexes == best_seq);
  CHECK(gen.score == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("a one-step cap returns the top class") {
  std::mt19937_64 rng(5);
  const ModelConfig c = config(8, 2);
  const PointerModel m = make_pointer_model(c, 8);
  const EncodedSource src = encode(m, random_source(rng, c, 4));
  const auto lp = pointer_log_distribution(pointer_keys(m, src), decode_step(m, src, {}));
  const int top = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  GenConfig g;
  g.beam = 4;
  g.max_length = 1;
  const Generation gen = beam_search(m, src, g);
  if (top == kEosClass) CHECK(gen.sequence.indexes.empty());
  else CHECK(gen.sequence.indexes == std::vector<int>{top});
}

TEST_CASE("eos first gives an empty prediction") {
  // all-zero parameters: uniform steps, ties go to class 0 (eos)
  const PointerModel m = build_pointer_model(config(4, 2));
  const EncodedSource src = encode(m, {2, 3, 4});
  const Generation gen = greedy(m, src, GenConfig{});
  CHECK(gen.sequence.indexes.empty());
  CHECK(gen.finished);
  CHECK(gen.score == doctest::Approx(-std::log(6.0)));
}

TEST_CASE("generation config") {
  GenConfig g;
  g.beam = 0;
  CHECK_THROWS_AS(g.validate(), ValidationError);
  CHECK(GenConfig{}.resolve_max_length(7) == 24);
}
