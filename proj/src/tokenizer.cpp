#include "ptrner/tokenizer.hpp"

#include <fstream>
#include <set>

#include "ptrner/errors.hpp"

namespace ptrner {

namespace {

std::string marked(std::string_view s) { return std::string(kWordStart) + std::string(s); }

bool is_base_symbol(const std::string& s) {
  std::string_view body = s;
  if (body.substr(0, kWordStart.size()) == kWordStart && body.size() > kWordStart.size()) body.remove_prefix(kWordStart.size());
  return split_utf8(body).size() == 1;
}

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> symbols = split_utf8(word);
  if (!symbols.empty()) symbols.front() = marked(symbols.front());
  return symbols;
}

void apply_merge(std::vector<std::string>& symbols, const std::string& left, const std::string& right) {
  std::vector<std::string> out;
  out.reserve(symbols.size());
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
      out.push_back(left + right);
      ++i;
    } else {
      out.push_back(std::move(symbols[i]));
    }
  }
  symbols = std::move(out);
}

}  // namespace

std::vector<std::string> split_utf8(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead < 0xF8) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    if (len > 1) {
      if (i + len > text.size()) len = 1;
      for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
          len = 1;
          break;
        }
      }
    }
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

BpeVocab BpeVocab::from_parts(std::vector<Merge> merges, std::vector<std::string> pieces, bool passthrough) {
  BpeVocab v;
  v.passthrough_ = passthrough;
  if (pieces.empty() || pieces.front() != kUnkPiece) throw ValidationError("vocab: first piece must be " + std::string(kUnkPiece));
  if (passthrough && !merges.empty()) throw ValidationError("vocab: pass-through vocab cannot carry merges");
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    if (!v.piece_ids_.emplace(pieces[i], static_cast<int>(i)).second) {
      throw ValidationError("vocab: duplicate piece '" + pieces[i] + "'");
    }
  }
  std::set<std::string> derivable;
  for (std::size_t r = 0; r < merges.size(); ++r) {
    const auto& [a, b] = merges[r];
    for (const std::string* s : {&a, &b}) {
      if (!is_base_symbol(*s) && !derivable.count(*s)) {
        throw ValidationError("vocab: merge " + std::to_string(r) + " uses underived symbol '" + *s + "'");
      }
    }
    if (b.substr(0, kWordStart.size()) == kWordStart) {
      throw ValidationError("vocab: merge " + std::to_string(r) + " has a word-initial right symbol");
    }
    derivable.insert(a + b);
    v.ranks_.emplace(merges[r], static_cast<int>(r));
  }
  v.merges_ = std::move(merges);
  v.pieces_ = std::move(pieces);
  return v;
}

BpeVocab BpeVocab::from_json(const nlohmann::json& j) {
  std::vector<Merge> merges;
  for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<std::string>(), m.at(1).get<std::string>());
  return from_parts(std::move(merges), j.at("pieces").get<std::vector<std::string>>(), j.value("passthrough", false));
}

nlohmann::ordered_json BpeVocab::to_json() const {
  nlohmann::ordered_json j;
  j["merges"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : merges_) j["merges"].push_back({a, b});
  j["pieces"] = pieces_;
  if (passthrough_) j["passthrough"] = true;
  return j;
}

int BpeVocab::id_of(std::string_view piece) const {
  const auto it = piece_ids_.find(piece);
  return it == piece_ids_.end() ? unk_id() : it->second;
}

bool BpeVocab::contains(std::string_view piece) const { return piece_ids_.find(piece) != piece_ids_.end(); }

int BpeVocab::merge_rank(const std::string& left, const std::string& right) const {
  const auto it = ranks_.find(Merge{left, right});
  return it == ranks_.end() ? -1 : it->second;
}

BpeVocab train_bpe(const std::vector<std::string>& corpus_words, int num_merges) {
  if (corpus_words.empty()) throw Error("train_bpe: empty corpus");
  if (num_merges < 0) throw Error("train_bpe: negative merge count");

  std::map<std::string, long> freq;
  for (const std::string& w : corpus_words) {
    if (w.empty()) throw Error("train_bpe: empty word in corpus");
    ++freq[w];
  }
  std::vector<std::pair<std::vector<std::string>, long>> words;
  std::set<std::string> base;
  for (const auto& [w, c] : freq) {
    words.emplace_back(initial_symbols(w), c);
    for (const std::string& s : words.back().first) base.insert(s);
  }

  std::vector<BpeVocab::Merge> merges;
  for (int round = 0; round < num_merges; ++round) {
    std::map<BpeVocab::Merge, long> pairs;
    for (const auto& [symbols, count] : words)
      for (std::size_t i = 0; i + 1 < symbols.size(); ++i) pairs[{symbols[i], symbols[i + 1]}] += count;
    if (pairs.empty()) break;
    auto best = pairs.begin();
    for (auto it = pairs.begin(); it != pairs.end(); ++it)
      if (it->second > best->second) best = it;
    const BpeVocab::Merge chosen = best->first;
    for (auto& entry : words) apply_merge(entry.first, chosen.first, chosen.second);
    merges.push_back(chosen);
  }

  std::vector<std::string> pieces{std::string(kUnkPiece)};
  std::set<std::string> seen;
  for (const std::string& s : base)
    if (seen.insert(s).second) pieces.push_back(s);
  for (const auto& [a, b] : merges)
    if (seen.insert(a + b).second) pieces.push_back(a + b);
  return BpeVocab::from_parts(std::move(merges), std::move(pieces), false);
}

BpeVocab passthrough_vocab(const Dataset& dataset) {
  std::set<std::string> words;
  for (const RawSentence& s : dataset.sentences)
    for (const std::string& w : s.words) words.insert(marked(w));
  std::vector<std::string> pieces{std::string(kUnkPiece)};
  pieces.insert(pieces.end(), words.begin(), words.end());
  return BpeVocab::from_parts({}, std::move(pieces), true);
}

std::vector<Piece> encode_word(const BpeVocab& vocab, std::string_view word) {
  std::vector<Piece> out;
  if (word.empty()) return out;
  if (vocab.passthrough()) {
    std::string text = marked(word);
    const int id = vocab.id_of(text);
    out.push_back({std::move(text), id});
    return out;
  }
  std::vector<std::string> symbols = initial_symbols(word);
  while (symbols.size() > 1) {
    int best_rank = -1;
    std::size_t best_at = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const int r = vocab.merge_rank(symbols[i], symbols[i + 1]);
      if (r >= 0 && (best_rank < 0 || r < best_rank)) {
        best_rank = r;
        best_at = i;
      }
    }
    if (best_rank < 0) break;
    const BpeVocab::Merge m{symbols[best_at], symbols[best_at + 1]};
    apply_merge(symbols, m.first, m.second);
  }
  out.reserve(symbols.size());
  for (std::string& s : symbols) {
    const int id = vocab.id_of(s);
    out.push_back({std::move(s), id});
  }
  return out;
}

TokenizedSentence tokenize_sentence(const BpeVocab& vocab, const std::vector<std::string>& words) {
  if (words.empty()) throw Error("tokenize_sentence: no words");
  TokenizedSentence t;
  t.words = words;
  for (std::size_t w = 0; w < words.size(); ++w) {
    const int first = t.n() + 1;
    std::vector<Piece> pieces = encode_word(vocab, words[w]);
    if (pieces.empty()) throw Error("tokenize_sentence: empty word");
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      t.pieces.push_back(std::move(pieces[k].text));
      t.piece_ids.push_back(pieces[k].id);
      t.is_word_start.push_back(k == 0 ? 1 : 0);
      t.piece_word.push_back(static_cast<int>(w));
    }
    t.word_spans.emplace_back(first, t.n());
  }
  return t;
}

std::vector<std::string> detokenize(const TokenizedSentence& sentence) {
  std::vector<std::string> words;
  for (const auto& [first, last] : sentence.word_spans) {
    std::string w;
    for (int p = first; p <= last; ++p) {
      std::string_view piece = sentence.pieces[p - 1];
      if (p == first && piece.substr(0, kWordStart.size()) == kWordStart) piece.remove_prefix(kWordStart.size());
      w += piece;
    }
    words.push_back(std::move(w));
  }
  return words;
}

BpeVocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open vocab " + path);
  try {
    return BpeVocab::from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("vocab " + path + ": " + e.what());
  }
}

void save_vocab(const BpeVocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocab " + path);
  out << vocab.to_json().dump(1) << '\n';
}

}  // namespace ptrner
