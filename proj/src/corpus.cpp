#include "ptrner/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ptrner/errors.hpp"

namespace ptrner {

using ordered_json = nlohmann::ordered_json;

int Entity::word_count() const {
  int count = 0;
  for (const Fragment& f : fragments) count += f.end - f.start + 1;
  return count;
}

int Dataset::tag_position(const std::string& tag) const {
  const auto it = std::find(tags.begin(), tags.end(), tag);
  return it == tags.end() ? -1 : static_cast<int>(it - tags.begin());
}

namespace {

std::string describe(const Entity& e) {
  std::string s = e.tag + "[";
  for (std::size_t i = 0; i < e.fragments.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(e.fragments[i].start) + "-" + std::to_string(e.fragments[i].end);
  }
  return s + "]";
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

struct BioLabel {
  char prefix;  // 'B', 'I' or 'O'
  std::string type;
};

std::optional<BioLabel> parse_bio(const std::string& label) {
  if (label == "O") return BioLabel{'O', {}};
  if (label.size() > 2 && (label[0] == 'B' || label[0] == 'I') && label[1] == '-') {
    return BioLabel{label[0], label.substr(2)};
  }
  return std::nullopt;
}

}  // namespace

void validate_sentence(RawSentence& sentence, const std::string& where) {
  if (sentence.words.empty()) throw ValidationError(where + ": sentence has no words");
  for (const std::string& w : sentence.words) {
    if (w.empty()) throw ValidationError(where + ": empty word");
    if (std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::isspace(c); })) {
      throw ValidationError(where + ": word contains whitespace: '" + w + "'");
    }
  }
  const int n = static_cast<int>(sentence.words.size());
  for (std::size_t k = 0; k < sentence.entities.size(); ++k) {
    Entity& e = sentence.entities[k];
    const std::string who = where + ": entity " + std::to_string(k);
    if (e.fragments.empty()) throw ValidationError(who + " has no spans");
    if (e.tag.empty()) throw ValidationError(who + " has an empty type");
    for (const Fragment& f : e.fragments) {
      if (f.start > f.end) throw ValidationError(who + " has a span with start > end");
      if (f.start < 0 || f.end >= n) throw ValidationError(who + " has a span out of range");
    }
    std::sort(e.fragments.begin(), e.fragments.end());
    for (std::size_t i = 1; i < e.fragments.size(); ++i) {
      if (e.fragments[i].start <= e.fragments[i - 1].end) {
        throw ValidationError(who + " has overlapping spans " + describe(e));
      }
    }
  }
  std::set<Entity> seen;
  for (std::size_t k = 0; k < sentence.entities.size(); ++k) {
    if (!seen.insert(sentence.entities[k]).second) {
      throw ValidationError(where + ": entity " + std::to_string(k) + " duplicates " + describe(sentence.entities[k]));
    }
  }
}

std::vector<std::string> collect_tags(const std::vector<RawSentence>& sentences) {
  std::set<std::string> tags;
  for (const RawSentence& s : sentences)
    for (const Entity& e : s.entities) tags.insert(e.tag);
  return {tags.begin(), tags.end()};
}

void assign_tag_vocabulary(Dataset& dataset, const std::optional<std::vector<std::string>>& tags) {
  if (!tags) {
    dataset.tags = collect_tags(dataset.sentences);
    return;
  }
  std::set<std::string> unique(tags->begin(), tags->end());
  if (unique.size() != tags->size()) throw ValidationError("tag list contains duplicates");
  for (const std::string& t : collect_tags(dataset.sentences)) {
    if (!unique.count(t)) throw ValidationError("entity type '" + t + "' is not in the tag list");
  }
  dataset.tags = *tags;
}

EntitySet bio_to_entities(const std::vector<std::string>& tags, BioMode mode) {
  EntitySet out;
  std::optional<Entity> open;
  auto close = [&] {
    if (open) out.push_back(std::move(*open));
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto label = parse_bio(tags[i]);
    if (!label) throw BioError(i, "malformed BIO label '" + tags[i] + "'");
    const int pos = static_cast<int>(i);
    if (label->prefix == 'O') {
      close();
    } else if (label->prefix == 'B') {
      close();
      open = Entity{{{pos, pos}}, label->type};
    } else if (open && open->tag == label->type) {
      open->fragments.back().end = pos;
    } else {
      if (mode == BioMode::Strict) {
        throw BioError(i, tags[i] + " does not continue an entity of that type");
      }
      close();
      open = Entity{{{pos, pos}}, label->type};
    }
  }
  close();
  return out;
}

std::vector<std::string> entities_to_bio(const RawSentence& sentence) {
  std::vector<std::string> labels(sentence.words.size(), "O");
  std::vector<int> owner(sentence.words.size(), -1);
  for (std::size_t k = 0; k < sentence.entities.size(); ++k) {
    const Entity& e = sentence.entities[k];
    if (e.fragments.size() != 1) {
      throw ValidationError("not BIO-representable: entity " + std::to_string(k) + " " + describe(e) + " is discontinuous");
    }
    const Fragment f = e.fragments.front();
    for (int w = f.start; w <= f.end; ++w) {
      if (owner[w] >= 0) {
        throw ValidationError("not BIO-representable: entity " + std::to_string(k) + " " + describe(e) +
                              " overlaps entity " + std::to_string(owner[w]));
      }
      owner[w] = static_cast<int>(k);
      labels[w] = (w == f.start ? "B-" : "I-") + e.tag;
    }
  }
  return labels;
}

Dataset read_conll(std::istream& in, BioMode mode, const std::optional<std::vector<std::string>>& tags) {
  Dataset ds;
  std::vector<std::string> words, labels;
  std::size_t line_no = 0, sentence_start = 0;
  auto flush = [&] {
    if (words.empty()) return;
    RawSentence s;
    try {
      s.entities = bio_to_entities(labels, mode);
    } catch (const BioError& e) {
      throw ParseError(sentence_start + e.token(), e.detail());
    }
    s.words = std::move(words);
    validate_sentence(s, "line " + std::to_string(sentence_start));
    ds.sentences.push_back(std::move(s));
    words.clear();
    labels.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) {
      flush();
      continue;
    }
    std::istringstream fields(line);
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(std::move(f));
    if (cols.size() != 2) {
      throw ParseError(line_no, "expected 2 columns (token and tag), found " + std::to_string(cols.size()));
    }
    if (!parse_bio(cols[1])) throw ParseError(line_no, "malformed BIO label '" + cols[1] + "'");
    if (words.empty()) sentence_start = line_no;
    words.push_back(std::move(cols[0]));
    labels.push_back(std::move(cols[1]));
  }
  flush();
  assign_tag_vocabulary(ds, tags);
  return ds;
}

void write_conll(std::ostream& out, const Dataset& dataset) {
  for (std::size_t i = 0; i < dataset.sentences.size(); ++i) {
    const RawSentence& s = dataset.sentences[i];
    const auto labels = entities_to_bio(s);
    for (std::size_t w = 0; w < s.words.size(); ++w) out << s.words[w] << '\t' << labels[w] << '\n';
    out << '\n';
  }
}

Dataset read_jsonl(std::istream& in, const std::optional<std::vector<std::string>>& tags) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (is_blank(line)) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    RawSentence s;
    try {
      s.words = obj.at("tokens").get<std::vector<std::string>>();
      for (const auto& ent : obj.value("entities", nlohmann::json::array())) {
        Entity e;
        e.tag = ent.at("type").get<std::string>();
        for (const auto& span : ent.at("spans")) {
          if (!span.is_array() || span.size() != 2) throw ParseError(line_no, "span must be a pair of integers");
          e.fragments.push_back({span[0].get<int>(), span[1].get<int>()});
        }
        s.entities.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("schema mismatch: ") + e.what());
    }
    validate_sentence(s, "line " + std::to_string(line_no));
    ds.sentences.push_back(std::move(s));
  }
  assign_tag_vocabulary(ds, tags);
  return ds;
}

std::string sentence_to_json_line(const RawSentence& sentence) {
  ordered_json obj;
  obj["tokens"] = sentence.words;
  ordered_json ents = ordered_json::array();
  for (const Entity& e : sentence.entities) {
    ordered_json spans = ordered_json::array();
    for (const Fragment& f : e.fragments) spans.push_back({f.start, f.end});
    ents.push_back(ordered_json{{"spans", spans}, {"type", e.tag}});
  }
  obj["entities"] = ents;
  return obj.dump();
}

void write_jsonl(std::ostream& out, const Dataset& dataset) {
  for (const RawSentence& s : dataset.sentences) out << sentence_to_json_line(s) << '\n';
}

Dataset read_dataset_file(const std::string& path, BioMode mode, const std::optional<std::vector<std::string>>& tags) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".conll") || ends_with(".txt") || ends_with(".bio")) return read_conll(in, mode, tags);
  return read_jsonl(in, tags);
}

}  // namespace ptrner
