#pragma once
// Entity sets <-> pointer-index target sequences.
//
// A target sequence is a concatenation of entity blocks. Each block holds
// pointer indexes in [1, n] (BPE positions) and ends with one tag index in
// (n, n + l]. Control tokens (bos/eos) are not part of it.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptrner/corpus.hpp"
#include "ptrner/tokenizer.hpp"

namespace ptrner {

// Span: first/last BPE of each fragment. Bpe: every BPE of every entity word.
// Word: first BPE of every entity word.
enum class Scheme { Span, Bpe, Word };

std::string_view scheme_name(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct TargetSequence {
  std::vector<int> indexes;
  int n = 0;  // source pieces
  int l = 0;  // tags

  bool is_tag(int y) const { return y > n; }
};

struct DecodedEntity {
  std::vector<int> index_list;
  std::string tag;

  friend bool operator==(const DecodedEntity&, const DecodedEntity&) = default;
};

enum class Verdict { Valid, E1, E2 };

// How a Span-scheme end index that is not the last BPE of its word is treated:
// Strict rejects it as E1, Lenient snaps outward to the word boundary.
enum class SpanEndPolicy { Lenient, Strict };

// Pointer indexes of one entity (no tag).
std::vector<int> entity_pointers(const TokenizedSentence& sent, const Entity& entity, Scheme scheme);

// Stable sort by (first pointer, last pointer, tag position).
EntitySet sort_entities(EntitySet entities, const TokenizedSentence& sent, Scheme scheme,
                        const std::vector<std::string>& tags);

TargetSequence linearize(const TokenizedSentence& sent, const EntitySet& entities, Scheme scheme,
                         const std::vector<std::string>& tags);

// Splits a sequence at tag indexes. Pointer indexes after the last tag are
// dropped. Indexes must lie in [1, n + l].
std::vector<DecodedEntity> decode_indices(const TargetSequence& seq, const std::vector<std::string>& tags);

// Number of pointer indexes after the final tag (a dangling, unclosed entity).
int trailing_pointer_count(const TargetSequence& seq);

Verdict validate_entity(const DecodedEntity& entity, Scheme scheme, const TokenizedSentence& sent,
                        SpanEndPolicy policy = SpanEndPolicy::Lenient);

// Inverse of entity_pointers for a Valid entity; nullopt when the index list
// cannot describe word fragments (odd Span list, partially covered Bpe word).
std::optional<Entity> to_fragments(const DecodedEntity& entity, Scheme scheme, const TokenizedSentence& sent);

// Drops exact repeats, keeping first occurrences; returns the removal count.
std::pair<EntitySet, int> dedupe(EntitySet entities);

struct InvalidCounts {
  int e1 = 0;
  int e2 = 0;  // includes entities that to_fragments rejected
  int e3 = 0;
  int truncated = 0;
  int raw = 0;  // decoded entities before any filtering

  InvalidCounts& operator+=(const InvalidCounts& o);
};

struct Postprocessed {
  EntitySet entities;
  InvalidCounts invalid;
};

// decode_indices -> validate_entity -> to_fragments -> dedupe.
Postprocessed postprocess(const TargetSequence& seq, const TokenizedSentence& sent, Scheme scheme,
                          const std::vector<std::string>& tags, SpanEndPolicy policy = SpanEndPolicy::Lenient);

// Length of an entity's block (pointers plus its tag).
int block_length(const TokenizedSentence& sent, const Entity& entity, Scheme scheme);

}  // namespace ptrner
