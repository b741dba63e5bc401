#pragma once
// Seeded synthetic corpora for the learning check and fuzz sentences for the
// linearization round-trip.

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ptrner/corpus.hpp"

namespace ptrner {

enum class SynthFamily { Flat, Nested, Discontinuous, Mixed };

std::string_view synth_family_name(SynthFamily family);
SynthFamily parse_synth_family(std::string_view name);

struct SynthConfig {
  int sentences = 200;
  int vocab = 50;  // distinct words, at least 17
  SynthFamily family = SynthFamily::Mixed;
  std::uint64_t seed = 7;
  // Sentences are drawn from a stream named after the split, the lexicon from
  // one shared stream, so "train" and "test" corpora share their words.
  std::string split = "train";

  void validate() const;
};

// Word roles of a synthetic lexicon.
struct SynthLexicon {
  std::vector<std::string> filler;
  std::vector<std::string> person;       // PER: "person [surname]"
  std::vector<std::string> surname;
  std::vector<std::string> place;        // LOC: "place [place_kind]"
  std::vector<std::string> place_kind;
  std::vector<std::string> org_head;     // head word + PER, tag ORG around a nested PER
  std::vector<std::string> modifier;     // "m1 and m2 h" -> {m1 h}, {m2 h}, tag DIS
  std::vector<std::string> body;         // the shared head h
  std::string conjunction;

  std::size_t size() const;
};

SynthLexicon synth_lexicon(int vocab, std::uint64_t seed);

// Deterministic given the config; tags are the sorted label set.
Dataset synth_corpus(const SynthConfig& cfg);

// Uniform integer in [0, bound) from raw engine output (portable across
// standard libraries, unlike the distribution classes).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

// A random sentence with overlapping, nested, crossing, discontinuous and
// multi-type entities, already validated. Fragments of one entity never touch.
RawSentence fuzz_sentence(std::mt19937_64& rng, int max_words, const std::vector<std::string>& tags);

}  // namespace ptrner
