#include "ptrner/synth.hpp"

#include <algorithm>
#include <set>

#include "ptrner/errors.hpp"
#include "ptrner/rng.hpp"

namespace ptrner {

std::string_view synth_family_name(SynthFamily family) {
  switch (family) {
    case SynthFamily::Flat: return "flat";
    case SynthFamily::Nested: return "nested";
    case SynthFamily::Discontinuous: return "discontinuous";
    case SynthFamily::Mixed: return "mixed";
  }
  return "mixed";
}

SynthFamily parse_synth_family(std::string_view name) {
  if (name == "flat") return SynthFamily::Flat;
  if (name == "nested") return SynthFamily::Nested;
  if (name == "discontinuous") return SynthFamily::Discontinuous;
  if (name == "mixed") return SynthFamily::Mixed;
  throw ValidationError("unknown pattern family '" + std::string(name) + "' (flat, nested, discontinuous, mixed)");
}

void SynthConfig::validate() const {
  if (sentences < 1) throw ValidationError("synth: sentences must be >= 1");
  if (vocab < 17) throw ValidationError("synth: vocab must be >= 17");
  if (split.empty()) throw ValidationError("synth: split name must not be empty");
}

std::size_t SynthLexicon::size() const {
  return filler.size() + person.size() + surname.size() + place.size() + place_kind.size() + org_head.size() +
         modifier.size() + body.size() + 1;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  // Rejection sampling removes the modulo bias.
  const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string random_word(std::mt19937_64& rng) {
  const int length = 3 + static_cast<int>(uniform_below(rng, 5));
  std::string w;
  for (int i = 0; i < length; ++i) {
    const std::string_view set = (i % 2 == 0) ? kConsonants : kVowels;
    w.push_back(set[uniform_below(rng, set.size())]);
  }
  return w;
}

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[uniform_below(rng, v.size())];
}

// A word of `pool` not yet in the sentence; repeats only once the pool is used up.
const std::string& pick_fresh(std::mt19937_64& rng, const std::vector<std::string>& pool, const RawSentence& s) {
  std::vector<const std::string*> fresh;
  for (const std::string& w : pool)
    if (std::find(s.words.begin(), s.words.end(), w) == s.words.end()) fresh.push_back(&w);
  if (fresh.empty()) return pick(rng, pool);
  return *fresh[uniform_below(rng, fresh.size())];
}

int between(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(uniform_below(rng, hi - lo + 1)); }

}  // namespace

SynthLexicon synth_lexicon(int vocab, std::uint64_t seed) {
  std::mt19937_64 rng = SeedStreams(seed).stream("synth.lexicon");
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (static_cast<int>(words.size()) < vocab) {
    std::string w = random_word(rng);
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  // Role sizes scale with the vocabulary: 40% filler, the rest split over the
  // seven entity roles with at least two words each (one conjunction).
  const int content = vocab - 1;
  const int filler = std::max(2, std::min(content * 2 / 5, content - 14));
  const int rest = content - filler;
  const int pair_role = std::max(2, rest * 4 / 29);
  const int org = std::max(2, rest * 4 / 29);
  const int modifier = std::max(2, rest * 5 / 29);
  const int body = rest - 4 * pair_role - org - modifier;
  if (body < 2) throw ValidationError("synth: vocab too small for all word roles");

  SynthLexicon lex;
  auto it = words.begin();
  auto take = [&](std::vector<std::string>& dst, int count) {
    dst.assign(it, it + count);
    it += count;
  };
  take(lex.filler, filler);
  take(lex.person, pair_role);
  take(lex.surname, pair_role);
  take(lex.place, pair_role);
  take(lex.place_kind, pair_role);
  take(lex.org_head, org);
  take(lex.modifier, modifier);
  take(lex.body, body);
  lex.conjunction = *it;
  return lex;
}

namespace {

// Appends one entity segment starting at words.size().
void add_segment(std::mt19937_64& rng, const SynthLexicon& lex, SynthFamily family, RawSentence& s) {
  auto push = [&](const std::string& w) {
    s.words.push_back(w);
    return static_cast<int>(s.words.size()) - 1;
  };
  // "name" or "name second", e.g. a given name and a surname.
  auto run = [&](const std::vector<std::string>& names, const std::vector<std::string>& seconds, const std::string& tag) {
    const int first = push(pick_fresh(rng, names, s));
    if (uniform_below(rng, 2) == 0) push(pick_fresh(rng, seconds, s));
    s.entities.push_back({{{first, static_cast<int>(s.words.size()) - 1}}, tag});
  };
  switch (family) {
    case SynthFamily::Flat:
      if (uniform_below(rng, 2) == 0) run(lex.person, lex.surname, "PER");
      else run(lex.place, lex.place_kind, "LOC");
      break;
    case SynthFamily::Nested: {
      const int head = push(pick_fresh(rng, lex.org_head, s));
      run(lex.person, lex.surname, "PER");
      s.entities.push_back({{{head, static_cast<int>(s.words.size()) - 1}}, "ORG"});
      break;
    }
    case SynthFamily::Discontinuous:
      if (uniform_below(rng, 2) == 0) {
        const int m1 = push(pick_fresh(rng, lex.modifier, s));
        push(lex.conjunction);
        const int m2 = push(pick_fresh(rng, lex.modifier, s));
        const int h = push(pick_fresh(rng, lex.body, s));
        s.entities.push_back({{{m1, m1}, {h, h}}, "DIS"});
        s.entities.push_back({{{m2, h}}, "DIS"});
      } else {
        const int m = push(pick_fresh(rng, lex.modifier, s));
        const int h = push(pick_fresh(rng, lex.body, s));
        s.entities.push_back({{{m, h}}, "DIS"});
      }
      break;
    case SynthFamily::Mixed:
      break;
  }
}

}  // namespace

Dataset synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  const SynthLexicon lex = synth_lexicon(cfg.vocab, cfg.seed);
  std::mt19937_64 rng = SeedStreams(cfg.seed).stream("synth.sentences." + cfg.split);
  const std::vector<SynthFamily> all{SynthFamily::Flat, SynthFamily::Nested, SynthFamily::Discontinuous};
  Dataset ds;
  for (int i = 0; i < cfg.sentences; ++i) {
    RawSentence s;
    const int segments = between(rng, 1, 3);
    const int lead = between(rng, 0, 2);
    for (int k = 0; k < lead; ++k) s.words.push_back(pick_fresh(rng, lex.filler, s));
    for (int seg = 0; seg < segments; ++seg) {
      const SynthFamily f = cfg.family == SynthFamily::Mixed ? pick(rng, all) : cfg.family;
      add_segment(rng, lex, f, s);
      // Segments are always separated so that entity runs never touch.
      const int gap = seg + 1 < segments ? between(rng, 1, 3) : between(rng, 0, 2);
      for (int k = 0; k < gap; ++k) s.words.push_back(pick_fresh(rng, lex.filler, s));
    }
    validate_sentence(s, "synthetic sentence " + std::to_string(i + 1));
    ds.sentences.push_back(std::move(s));
  }
  assign_tag_vocabulary(ds, std::nullopt);
  return ds;
}

RawSentence fuzz_sentence(std::mt19937_64& rng, int max_words, const std::vector<std::string>& tags) {
  if (max_words < 1 || tags.empty()) throw ValidationError("fuzz_sentence: need max_words >= 1 and a tag");
  RawSentence s;
  const int n = between(rng, 1, max_words);
  for (int i = 0; i < n; ++i) s.words.push_back(random_word(rng));
  const int count = between(rng, 0, 6);
  std::set<Entity> seen;
  for (int k = 0; k < count; ++k) {
    Entity e;
    if (!s.entities.empty() && uniform_below(rng, 5) == 0) {
      // Same spans under another type.
      e = pick(rng, s.entities);
      e.tag = pick(rng, tags);
    } else {
      const int pieces = between(rng, 1, 3);
      int cursor = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(n)));
      for (int p = 0; p < pieces && cursor < n; ++p) {
        const int end = cursor + static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(std::min(3, n - cursor))));
        e.fragments.push_back({cursor, end});
        // At least one word between fragments: touching ones read back as a single span.
        cursor = end + 2 + static_cast<int>(uniform_below(rng, 2));
      }
      e.tag = pick(rng, tags);
    }
    RawSentence probe{s.words, {e}};
    validate_sentence(probe, "fuzz");
    e = probe.entities[0];
    if (seen.insert(e).second) s.entities.push_back(std::move(e));
  }
  validate_sentence(s, "fuzz");
  return s;
}

}  // namespace ptrner
