#pragma once
// Byte-pair-encoding vocabulary and the 1-based piece index space.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ptrner/corpus.hpp"

namespace ptrner {

// Prefix carried by every word-initial piece (U+2581).
inline constexpr std::string_view kWordStart = "\xE2\x96\x81";
inline constexpr std::string_view kUnkPiece = "<unk>";

struct Piece {
  std::string text;  // surface text, marker included on word-initial pieces
  int id = 0;        // vocabulary id; unknown symbols get the UNK id
};

class BpeVocab {
 public:
  using Merge = std::pair<std::string, std::string>;

  // Validates and assembles a vocabulary. In pass-through mode every word is a
  // single piece and `merges` must be empty.
  static BpeVocab from_parts(std::vector<Merge> merges, std::vector<std::string> pieces, bool passthrough);
  static BpeVocab from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;

  bool passthrough() const { return passthrough_; }
  const std::vector<Merge>& merges() const { return merges_; }
  const std::vector<std::string>& pieces() const { return pieces_; }
  std::size_t size() const { return pieces_.size(); }
  int unk_id() const { return 0; }

  // Id of a piece, or the UNK id when absent.
  int id_of(std::string_view piece) const;
  bool contains(std::string_view piece) const;
  // Training rank of a merge, or -1.
  int merge_rank(const std::string& left, const std::string& right) const;

 private:
  std::vector<Merge> merges_;
  std::vector<std::string> pieces_;
  std::map<std::string, int, std::less<>> piece_ids_;
  std::map<Merge, int> ranks_;
  bool passthrough_ = false;
};

// Splits UTF-8 text into code points; invalid bytes become single-byte symbols.
std::vector<std::string> split_utf8(std::string_view text);

// Greedy most-frequent-pair training; ties go to the lexicographically
// smallest pair. Throws Error on an empty corpus.
BpeVocab train_bpe(const std::vector<std::string>& corpus_words, int num_merges);

// One piece per distinct word of the dataset.
BpeVocab passthrough_vocab(const Dataset& dataset);

// Applies merges in rank order until no adjacent pair has a merge. Word-initial
// pieces are marked regardless of the word's position in the sentence.
std::vector<Piece> encode_word(const BpeVocab& vocab, std::string_view word);

struct TokenizedSentence {
  std::vector<std::string> words;
  std::vector<std::string> pieces;           // position p lives at pieces[p - 1]
  std::vector<int> piece_ids;
  std::vector<std::pair<int, int>> word_spans;  // 1-based inclusive piece range per word
  std::vector<std::uint8_t> is_word_start;   // indexed by position - 1
  std::vector<int> piece_word;               // 0-based word owning position p at [p - 1]

  int n() const { return static_cast<int>(pieces.size()); }
  bool starts_word(int pos) const { return is_word_start[pos - 1] != 0; }
  int word_of(int pos) const { return piece_word[pos - 1]; }
};

TokenizedSentence tokenize_sentence(const BpeVocab& vocab, const std::vector<std::string>& words);

// Strips word-start markers and rejoins pieces per word span.
std::vector<std::string> detokenize(const TokenizedSentence& sentence);

BpeVocab load_vocab(const std::string& path);
void save_vocab(const BpeVocab& vocab, const std::string& path);

}  // namespace ptrner
