#pragma once
// Span-level scoring and the analysis tables.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptrner/corpus.hpp"
#include "ptrner/linearizer.hpp"
#include "ptrner/tokenizer.hpp"

namespace ptrner {

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long tp = 0;
  long predicted = 0;
  long gold = 0;
};

// Precision and recall are 0 when their denominator is 0; F1 is 0 when P+R = 0.
PRF prf_from_counts(long tp, long predicted, long gold);

// Exact (fragments, tag) matching, micro-averaged over the corpus. Inputs must
// be duplicate-free per sentence; throws ValidationError otherwise or when
// the sentence counts differ.
PRF span_f1(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold);

std::map<std::string, PRF> per_tag_f1(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold);

struct RestrictedScore {
  PRF score;
  bool empty = false;  // neither side had a qualifying entity
};

// span_f1 with both sides restricted to entities of two or more fragments.
RestrictedScore discontinuous_f1(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold);

struct PositionBucket {
  std::string label;  // "1".."5", "6+"
  long count = 0;
  long matched = 0;
  double recall = 0.0;
};

// Gold entity at 1-based ordinal k of its (already ordered) sentence lands in
// bucket min(k, 6).
std::vector<PositionBucket> position_recall(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& ordered_gold);

struct LengthStats {
  double mean = 0.0;    // rounded to two decimals
  double median = 0.0;  // lower median
  long count = 0;
};

// Per-entity block length (pointers + tag). Throws Error("no entities") on an
// entity-free dataset.
LengthStats length_stats(const Dataset& dataset, const std::vector<TokenizedSentence>& tokenized, Scheme scheme);

struct InvalidReport {
  double e1 = 0.0, e2 = 0.0, e3 = 0.0;  // fractions of raw predicted entities
  long e1_count = 0, e2_count = 0, e3_count = 0;
  long total = 0;
  long truncated = 0;
  bool empty = false;  // no predicted entities at all
};

InvalidReport invalid_report(const std::vector<InvalidCounts>& per_sentence);

struct EvalReport {
  PRF micro;
  std::map<std::string, PRF> per_tag;
  RestrictedScore discontinuous;
  std::vector<PositionBucket> positions;
  std::map<std::string, LengthStats> lengths;  // keyed by scheme name
  std::optional<InvalidReport> invalid;
};

// Scores predictions against a gold dataset. Gold entities are ordered per
// `scheme` for the position table; `tokenized` supplies the piece space.
EvalReport evaluate_predictions(const std::vector<EntitySet>& pred, const Dataset& gold,
                                const std::vector<TokenizedSentence>& tokenized, Scheme scheme,
                                const std::optional<std::vector<InvalidCounts>>& invalid);

nlohmann::ordered_json to_json(const PRF& prf);
nlohmann::ordered_json to_json(const EvalReport& report);

// "bucket,count,recall" rows.
std::string position_recall_csv(const std::vector<PositionBucket>& buckets);

}  // namespace ptrner
