#include "ptrner/linearizer.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "ptrner/errors.hpp"

namespace ptrner {

std::string_view scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::Span: return "span";
    case Scheme::Bpe: return "bpe";
    case Scheme::Word: return "word";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "span") return Scheme::Span;
  if (name == "bpe") return Scheme::Bpe;
  if (name == "word") return Scheme::Word;
  throw ValidationError("unknown scheme '" + std::string(name) + "' (expected span, bpe or word)");
}

std::vector<int> entity_pointers(const TokenizedSentence& sent, const Entity& entity, Scheme scheme) {
  std::vector<int> out;
  for (const Fragment& f : entity.fragments) {
    if (f.start < 0 || f.end >= static_cast<int>(sent.word_spans.size()) || f.start > f.end) {
      throw ValidationError("entity fragment out of the sentence's word range");
    }
    switch (scheme) {
      case Scheme::Span:
        out.push_back(sent.word_spans[f.start].first);
        out.push_back(sent.word_spans[f.end].second);
        break;
      case Scheme::Bpe:
        for (int w = f.start; w <= f.end; ++w)
          for (int p = sent.word_spans[w].first; p <= sent.word_spans[w].second; ++p) out.push_back(p);
        break;
      case Scheme::Word:
        for (int w = f.start; w <= f.end; ++w) out.push_back(sent.word_spans[w].first);
        break;
    }
  }
  return out;
}

int block_length(const TokenizedSentence& sent, const Entity& entity, Scheme scheme) {
  return static_cast<int>(entity_pointers(sent, entity, scheme).size()) + 1;
}

namespace {

int tag_index(const std::vector<std::string>& tags, const std::string& tag) {
  const auto it = std::find(tags.begin(), tags.end(), tag);
  if (it == tags.end()) throw ValidationError("tag '" + tag + "' is not in the tag vocabulary");
  return static_cast<int>(it - tags.begin());
}

}  // namespace

EntitySet sort_entities(EntitySet entities, const TokenizedSentence& sent, Scheme scheme,
                        const std::vector<std::string>& tags) {
  using Key = std::tuple<int, int, int>;
  std::vector<std::pair<Key, std::size_t>> keyed;
  keyed.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const std::vector<int> ptr = entity_pointers(sent, entities[i], scheme);
    keyed.push_back({{ptr.front(), ptr.back(), tag_index(tags, entities[i].tag)}, i});
  }
  std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  EntitySet out;
  out.reserve(entities.size());
  for (const auto& [key, i] : keyed) out.push_back(std::move(entities[i]));
  return out;
}

TargetSequence linearize(const TokenizedSentence& sent, const EntitySet& entities, Scheme scheme,
                         const std::vector<std::string>& tags) {
  TargetSequence seq;
  seq.n = sent.n();
  seq.l = static_cast<int>(tags.size());
  for (const Entity& e : sort_entities(entities, sent, scheme, tags)) {
    const std::vector<int> ptr = entity_pointers(sent, e, scheme);
    seq.indexes.insert(seq.indexes.end(), ptr.begin(), ptr.end());
    seq.indexes.push_back(seq.n + tag_index(tags, e.tag) + 1);
  }
  return seq;
}

std::vector<DecodedEntity> decode_indices(const TargetSequence& seq, const std::vector<std::string>& tags) {
  std::vector<DecodedEntity> out;
  std::vector<int> pending;
  for (int y : seq.indexes) {
    if (y > seq.n) {
      if (!pending.empty()) out.push_back({std::move(pending), tags.at(static_cast<std::size_t>(y - seq.n - 1))});
      pending.clear();
    } else {
      pending.push_back(y);
    }
  }
  return out;
}

int trailing_pointer_count(const TargetSequence& seq) {
  int count = 0;
  for (int y : seq.indexes) count = y > seq.n ? 0 : count + 1;
  return count;
}

Verdict validate_entity(const DecodedEntity& entity, Scheme scheme, const TokenizedSentence& sent,
                        SpanEndPolicy policy) {
  const std::vector<int>& e = entity.index_list;
  if (scheme == Scheme::Span) {
    // Within a pair start <= end; across pairs strictly increasing.
    for (std::size_t i = 1; i < e.size(); ++i) {
      const bool inside_pair = (i % 2) == 1;
      if (inside_pair ? e[i] < e[i - 1] : e[i] <= e[i - 1]) return Verdict::E2;
    }
    for (std::size_t i = 0; i < e.size(); ++i) {
      const bool is_start = (i % 2) == 0;
      if (is_start && !sent.starts_word(e[i])) return Verdict::E1;
      if (!is_start && policy == SpanEndPolicy::Strict && sent.word_spans[sent.word_of(e[i])].second != e[i]) {
        return Verdict::E1;
      }
    }
    return Verdict::Valid;
  }
  for (std::size_t i = 1; i < e.size(); ++i)
    if (e[i] <= e[i - 1]) return Verdict::E2;
  if (scheme == Scheme::Word) {
    for (int p : e)
      if (!sent.starts_word(p)) return Verdict::E1;
  }
  return Verdict::Valid;
}

namespace {

std::vector<Fragment> merge_word_runs(const std::vector<int>& words) {
  std::vector<Fragment> out;
  for (int w : words) {
    if (!out.empty() && out.back().end + 1 == w) out.back().end = w;
    else out.push_back({w, w});
  }
  return out;
}

}  // namespace

std::optional<Entity> to_fragments(const DecodedEntity& entity, Scheme scheme, const TokenizedSentence& sent) {
  const std::vector<int>& e = entity.index_list;
  if (e.empty()) return std::nullopt;
  Entity out;
  out.tag = entity.tag;
  switch (scheme) {
    case Scheme::Span:
      if (e.size() % 2 != 0) return std::nullopt;
      for (std::size_t i = 0; i < e.size(); i += 2) {
        const Fragment f{sent.word_of(e[i]), sent.word_of(e[i + 1])};
        out.fragments.push_back(f);
      }
      break;
    case Scheme::Word: {
      std::vector<int> words;
      for (int p : e) words.push_back(sent.word_of(p));
      out.fragments = merge_word_runs(words);
      break;
    }
    case Scheme::Bpe: {
      std::vector<int> words;
      std::size_t i = 0;
      while (i < e.size()) {
        const int w = sent.word_of(e[i]);
        const auto [first, last] = sent.word_spans[w];
        for (int p = first; p <= last; ++p, ++i)
          if (i >= e.size() || e[i] != p) return std::nullopt;
        words.push_back(w);
      }
      out.fragments = merge_word_runs(words);
      break;
    }
  }
  return out;
}

std::pair<EntitySet, int> dedupe(EntitySet entities) {
  std::set<Entity> seen;
  EntitySet unique;
  int removed = 0;
  for (Entity& e : entities) {
    if (seen.insert(e).second) unique.push_back(std::move(e));
    else ++removed;
  }
  return {std::move(unique), removed};
}

InvalidCounts& InvalidCounts::operator+=(const InvalidCounts& o) {
  e1 += o.e1;
  e2 += o.e2;
  e3 += o.e3;
  truncated += o.truncated;
  raw += o.raw;
  return *this;
}

Postprocessed postprocess(const TargetSequence& seq, const TokenizedSentence& sent, Scheme scheme,
                          const std::vector<std::string>& tags, SpanEndPolicy policy) {
  Postprocessed result;
  const std::vector<DecodedEntity> decoded = decode_indices(seq, tags);
  result.invalid.raw = static_cast<int>(decoded.size());
  result.invalid.truncated = trailing_pointer_count(seq) > 0 ? 1 : 0;
  EntitySet kept;
  for (const DecodedEntity& d : decoded) {
    switch (validate_entity(d, scheme, sent, policy)) {
      case Verdict::E1: ++result.invalid.e1; continue;
      case Verdict::E2: ++result.invalid.e2; continue;
      case Verdict::Valid: break;
    }
    if (auto ent = to_fragments(d, scheme, sent)) kept.push_back(std::move(*ent));
    else ++result.invalid.e2;
  }
  auto [unique, dups] = dedupe(std::move(kept));
  result.entities = std::move(unique);
  result.invalid.e3 = dups;
  return result;
}

}  // namespace ptrner
