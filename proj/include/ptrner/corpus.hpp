#pragma once
// Annotated sentences, entity sets, and the CoNLL / JSONL readers.
//
// Word spans are 0-based and inclusive everywhere in this module. The 1-based
// pointer space only appears after tokenization.

#include <compare>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ptrner/errors.hpp"

namespace ptrner {

struct Fragment {
  int start = 0;  // first word, inclusive
  int end = 0;    // last word, inclusive

  auto operator<=>(const Fragment&) const = default;
};

// One entity: ascending, pairwise non-overlapping fragments plus a label.
struct Entity {
  std::vector<Fragment> fragments;
  std::string tag;

  bool is_discontinuous() const { return fragments.size() > 1; }
  int word_count() const;

  auto operator<=>(const Entity&) const = default;
};

using EntitySet = std::vector<Entity>;

struct RawSentence {
  std::vector<std::string> words;
  EntitySet entities;
};

struct Dataset {
  std::vector<RawSentence> sentences;
  std::vector<std::string> tags;  // the tag vocabulary G, no duplicates

  // 0-based position of `tag` in the vocabulary, or -1.
  int tag_position(const std::string& tag) const;
};

enum class BioMode { Strict, Lenient };

// A BIO label sequence that cannot be read; token() is the 0-based position.
class BioError : public ValidationError {
 public:
  BioError(std::size_t token, const std::string& what)
      : ValidationError("token " + std::to_string(token) + ": " + what), token_(token), detail_(what) {}
  std::size_t token() const { return token_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t token_;
  std::string detail_;
};

// Checks the entity invariants of one sentence; throws ValidationError.
// Fragments of each entity are sorted in place and otherwise kept as given.
void validate_sentence(RawSentence& sentence, const std::string& where);

// Sorted set of labels used by the sentences.
std::vector<std::string> collect_tags(const std::vector<RawSentence>& sentences);

// Installs `tags` as the vocabulary when given, else the sorted label set.
// Throws ValidationError when a used label is missing from an explicit list.
void assign_tag_vocabulary(Dataset& dataset, const std::optional<std::vector<std::string>>& tags);

EntitySet bio_to_entities(const std::vector<std::string>& tags, BioMode mode = BioMode::Lenient);
std::vector<std::string> entities_to_bio(const RawSentence& sentence);

Dataset read_conll(std::istream& in, BioMode mode = BioMode::Lenient,
                   const std::optional<std::vector<std::string>>& tags = std::nullopt);
void write_conll(std::ostream& out, const Dataset& dataset);

Dataset read_jsonl(std::istream& in, const std::optional<std::vector<std::string>>& tags = std::nullopt);
void write_jsonl(std::ostream& out, const Dataset& dataset);
std::string sentence_to_json_line(const RawSentence& sentence);

// Dispatches on the extension: ".conll"/".txt"/".bio" are CoNLL, anything else JSONL.
Dataset read_dataset_file(const std::string& path, BioMode mode = BioMode::Lenient,
                          const std::optional<std::vector<std::string>>& tags = std::nullopt);

}  // namespace ptrner
