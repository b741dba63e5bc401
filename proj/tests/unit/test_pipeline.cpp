#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>

#include "ptrner/checkpoint.hpp"
#include "ptrner/pipeline.hpp"
#include "ptrner/rng.hpp"
#include "ptrner/synth.hpp"

using namespace ptrner;

namespace {

Dataset small_corpus(const std::string& split, int n, SynthFamily family) {
  SynthConfig sc;
  sc.family = family;
  sc.sentences = n;
  sc.vocab = 20;
  sc.split = split;
  return synth_corpus(sc);
}

SystemSpec small_spec(ModelKind kind) {
  SystemSpec s;
  s.kind = kind;
  s.model.d = 8;
  s.model.enc_layers = 1;
  s.model.dec_layers = 1;
  s.model.heads = 2;
  s.model.ffn = 16;
  s.model.max_positions = 64;
  s.train.epochs = 2;
  s.train.batch_size = 4;
  s.train.lr = 3e-3;
  return s;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("ptrner_unit_" + name)).string();
}

std::string lines_of(const Dataset& data, const std::vector<SentencePrediction>& preds) {
  std::string out;
  for (std::size_t i = 0; i < preds.size(); ++i) out += prediction_json_line(data.sentences[i], preds[i]) + "\n";
  return out;
}

}  // namespace

TEST_CASE("saved systems predict exactly as before") {
  for (ModelKind kind : {ModelKind::Pointer, ModelKind::Tagger, ModelKind::TaggerCrf}) {
    CAPTURE(model_kind_name(kind));
    const SynthFamily family = kind == ModelKind::Pointer ? SynthFamily::Mixed : SynthFamily::Flat;
    const Dataset train_set = small_corpus("train", 12, family);
    const Dataset test_set = small_corpus("test", 6, family);
    std::vector<std::string> words;
    for (const RawSentence& s : train_set.sentences) words.insert(words.end(), s.words.begin(), s.words.end());
    const BpeVocab vocab = train_bpe(words, 40);
    const TrainOutcome out = train_system(small_spec(kind), vocab, train_set, nullptr);
    const std::string path = temp_path(std::string(model_kind_name(kind)) + ".ckpt");
    save_system(path, out.system);
    const System back = load_system(path);
    std::remove(path.c_str());
    CHECK(back.kind == kind);
    CHECK(back.tags == out.system.tags);
    GenConfig gen;
    gen.beam = 2;
    CHECK(lines_of(test_set, predict_dataset(out.system, test_set, gen)) ==
          lines_of(test_set, predict_dataset(back, test_set, gen)));
  }
}

TEST_CASE("model kind names") {
  CHECK(parse_model_kind("pointer") == ModelKind::Pointer);
  CHECK(parse_model_kind(model_kind_name(ModelKind::TaggerCrf)) == ModelKind::TaggerCrf);
  CHECK_THROWS_AS(parse_model_kind("lstm"), Error);
}

TEST_CASE("checkpoint streams round trip") {
  ParameterSet ps;
  const ParamId a = ps.add("a", 2, 3);
  const ParamId b = ps.add("b", 1, 1);
  ps.value(a).data = {1.5, -0.0, 1e-300, 3.0, -7.25, 0.1};
  ps.value(b).data = {42.0};
  nlohmann::ordered_json meta = {{"hello", "world"}};
  std::stringstream buf;
  write_checkpoint(buf, meta, ps);
  CHECK(buf.str().rfind(std::string(kCheckpointMagic), 0) == 0);

  const LoadedCheckpoint ck = read_checkpoint(buf);
  CHECK(ck.meta["hello"] == "world");
  ParameterSet fresh;
  fresh.add("a", 2, 3);
  fresh.add("b", 1, 1);
  load_parameters(fresh, ck);
  CHECK(fresh.value(a).data == ps.value(a).data);
  CHECK(std::signbit(fresh.value(a).data[1]));
  CHECK(fresh.value(b).data[0] == 42.0);

  ParameterSet wrong_shape;
  wrong_shape.add("a", 3, 2);
  wrong_shape.add("b", 1, 1);
  CHECK_THROWS_AS(load_parameters(wrong_shape, ck), ValidationError);
  ParameterSet missing;
  missing.add("c", 1, 1);
  CHECK_THROWS_AS(load_parameters(missing, ck), ValidationError);
}

TEST_CASE("damaged checkpoints are rejected") {
  ParameterSet ps;
  ps.add("w", 2, 2);
  std::stringstream buf;
  write_checkpoint(buf, nlohmann::ordered_json::object(), ps);
  const std::string good = buf.str();

  std::stringstream bad_magic("NOT-A-CKPT\n" + good.substr(kCheckpointMagic.size()));
  CHECK_THROWS_AS(read_checkpoint(bad_magic), Error);
  std::stringstream cut(good.substr(0, good.size() - 8));
  CHECK_THROWS_AS(read_checkpoint(cut), Error);
  std::stringstream empty;
  CHECK_THROWS_AS(read_checkpoint(empty), Error);
}

TEST_CASE("synthetic corpora are seeded") {
  SynthConfig sc;
  sc.sentences = 30;
  const Dataset a = synth_corpus(sc), b = synth_corpus(sc);
  std::ostringstream ja, jb;
  write_jsonl(ja, a);
  write_jsonl(jb, b);
  CHECK(ja.str() == jb.str());
  sc.seed = 8;
  std::ostringstream jc;
  write_jsonl(jc, synth_corpus(sc));
  CHECK(jc.str() != ja.str());
}

TEST_CASE("splits share one lexicon of the requested size") {
  for (int vocab : {17, 18, 20, 50, 90}) {
    const SynthLexicon lex = synth_lexicon(vocab, 7);
    CHECK(lex.size() == static_cast<std::size_t>(vocab));
    std::set<std::string> words(lex.filler.begin(), lex.filler.end());
    for (const auto* role : {&lex.person, &lex.surname, &lex.place, &lex.place_kind, &lex.org_head, &lex.modifier, &lex.body}) {
      CHECK_FALSE(role->empty());
      words.insert(role->begin(), role->end());
    }
    words.insert(lex.conjunction);
    CHECK(words.size() == static_cast<std::size_t>(vocab));

    SynthConfig sc;
    sc.vocab = vocab;
    sc.sentences = 40;
    for (const char* split : {"train", "test"}) {
      sc.split = split;
      for (const RawSentence& s : synth_corpus(sc).sentences)
        for (const std::string& w : s.words) CHECK(words.count(w) == 1);
    }
  }
  SynthConfig sc;
  sc.vocab = 16;
  CHECK_THROWS_AS(sc.validate(), ValidationError);
}

TEST_CASE("pattern families") {
  SynthConfig sc;
  sc.sentences = 60;
  auto tags_in = [&](SynthFamily f) {
    sc.family = f;
    std::set<std::string> tags;
    int discontinuous = 0, nested = 0;
    for (const RawSentence& s : synth_corpus(sc).sentences) {
      for (const Entity& e : s.entities) {
        tags.insert(e.tag);
        discontinuous += e.is_discontinuous();
        for (const Entity& o : s.entities)
          if (&o != &e && o.fragments.front().start >= e.fragments.front().start &&
              o.fragments.back().end <= e.fragments.back().end && !(o == e))
            ++nested;
      }
    }
    return std::tuple<std::set<std::string>, int, int>{tags, discontinuous, nested};
  };
  {
    const auto [tags, dis, nest] = tags_in(SynthFamily::Flat);
    CHECK(tags == std::set<std::string>{"LOC", "PER"});
    CHECK(dis == 0);
    CHECK(nest == 0);
  }
  {
    const auto [tags, dis, nest] = tags_in(SynthFamily::Nested);
    CHECK(tags.count("ORG") == 1);
    CHECK(nest > 0);
    CHECK(dis == 0);
  }
  {
    const auto [tags, dis, nest] = tags_in(SynthFamily::Discontinuous);
    CHECK(tags == std::set<std::string>{"DIS"});
    CHECK(dis > 0);
  }
  {
    const auto [tags, dis, nest] = tags_in(SynthFamily::Mixed);
    CHECK(tags == std::set<std::string>{"DIS", "LOC", "ORG", "PER"});
    CHECK(dis > 0);
    CHECK(nest > 0);
  }
  CHECK(parse_synth_family(synth_family_name(SynthFamily::Nested)) == SynthFamily::Nested);
}

TEST_CASE("two-word runs end in their second-word pool") {
  SynthConfig sc;
  sc.family = SynthFamily::Flat;
  sc.sentences = 80;
  const SynthLexicon lex = synth_lexicon(sc.vocab, sc.seed);
  auto in = [](const std::vector<std::string>& pool, const std::string& w) {
    return std::find(pool.begin(), pool.end(), w) != pool.end();
  };
  int pairs = 0, singles = 0;
  for (const RawSentence& s : synth_corpus(sc).sentences) {
    for (const Entity& e : s.entities) {
      const Fragment f = e.fragments.front();
      const bool per = e.tag == "PER";
      CHECK(in(per ? lex.person : lex.place, s.words[static_cast<std::size_t>(f.start)]));
      if (f.end > f.start) {
        ++pairs;
        CHECK(f.end == f.start + 1);
        CHECK(in(per ? lex.surname : lex.place_kind, s.words[static_cast<std::size_t>(f.end)]));
      } else {
        ++singles;
      }
    }
  }
  CHECK(pairs > 20);
  CHECK(singles > 20);
}

TEST_CASE("uniform_below stays in range and covers it") {
  std::mt19937_64 rng(3);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const std::uint64_t v = uniform_below(rng, 7);
    REQUIRE(v < 7);
    ++seen[v];
  }
  for (int c : seen) CHECK(c > 800);
  CHECK(uniform_below(rng, 1) == 0);
}

TEST_CASE("named seed streams") {
  const SeedStreams s(5);
  CHECK(s.derive("shuffle") == SeedStreams(5).derive("shuffle"));
  CHECK(s.derive("shuffle") != s.derive("dropout"));
  CHECK(s.derive("shuffle") != SeedStreams(6).derive("shuffle"));
  // reference values of the 64-bit mixer
  CHECK(splitmix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(splitmix64(1) == 0x910a2dec89025cc1ULL);
}

TEST_CASE("sinusoidal table") {
  ParameterSet ps;
  const ParamId id = ps.add("pos", 5, 6);
  ps.init_sinusoidal(id, 2.0);
  const Matrix& m = ps.value(id);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(m(r, 0) == doctest::Approx(2.0 * std::sin(double(r))));
    CHECK(m(r, 1) == doctest::Approx(2.0 * std::cos(double(r))));
    CHECK(m(r, 4) == doctest::Approx(2.0 * std::sin(r / std::pow(10000.0, 4.0 / 6.0))));
    CHECK(m(r, 5) == doctest::Approx(2.0 * std::cos(r / std::pow(10000.0, 4.0 / 6.0))));
  }
}
