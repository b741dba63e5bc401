#include "ptrner/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "ptrner/errors.hpp"

namespace ptrner {

PRF prf_from_counts(long tp, long predicted, long gold) {
  PRF r;
  r.tp = tp;
  r.predicted = predicted;
  r.gold = gold;
  r.precision = predicted > 0 ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
  r.recall = gold > 0 ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

namespace {

std::set<Entity> as_set(const EntitySet& entities, const char* side, std::size_t sentence) {
  std::set<Entity> s(entities.begin(), entities.end());
  if (s.size() != entities.size()) {
    throw ValidationError(std::string(side) + " sentence " + std::to_string(sentence) + " contains duplicate entities");
  }
  return s;
}

void check_sizes(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold) {
  if (pred.size() != gold.size()) {
    throw ValidationError("prediction has " + std::to_string(pred.size()) + " sentences, gold has " +
                          std::to_string(gold.size()));
  }
}

std::vector<EntitySet> restrict_discontinuous(const std::vector<EntitySet>& sets) {
  std::vector<EntitySet> out;
  out.reserve(sets.size());
  for (const EntitySet& s : sets) {
    EntitySet kept;
    std::copy_if(s.begin(), s.end(), std::back_inserter(kept), [](const Entity& e) { return e.is_discontinuous(); });
    out.push_back(std::move(kept));
  }
  return out;
}

}  // namespace

PRF span_f1(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold) {
  check_sizes(pred, gold);
  long tp = 0, np = 0, ng = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::set<Entity> p = as_set(pred[i], "predicted", i);
    const std::set<Entity> g = as_set(gold[i], "gold", i);
    np += static_cast<long>(p.size());
    ng += static_cast<long>(g.size());
    for (const Entity& e : p) tp += g.count(e) ? 1 : 0;
  }
  return prf_from_counts(tp, np, ng);
}

std::map<std::string, PRF> per_tag_f1(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold) {
  check_sizes(pred, gold);
  std::map<std::string, std::array<long, 3>> counts;  // tp, predicted, gold
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::set<Entity> p = as_set(pred[i], "predicted", i);
    const std::set<Entity> g = as_set(gold[i], "gold", i);
    for (const Entity& e : p) {
      auto& c = counts[e.tag];
      ++c[1];
      if (g.count(e)) ++c[0];
    }
    for (const Entity& e : g) ++counts[e.tag][2];
  }
  std::map<std::string, PRF> out;
  for (const auto& [tag, c] : counts) out[tag] = prf_from_counts(c[0], c[1], c[2]);
  return out;
}

RestrictedScore discontinuous_f1(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& gold) {
  RestrictedScore r;
  r.score = span_f1(restrict_discontinuous(pred), restrict_discontinuous(gold));
  r.empty = r.score.predicted == 0 && r.score.gold == 0;
  return r;
}

std::vector<PositionBucket> position_recall(const std::vector<EntitySet>& pred, const std::vector<EntitySet>& ordered_gold) {
  check_sizes(pred, ordered_gold);
  std::vector<PositionBucket> buckets(6);
  for (std::size_t b = 0; b < 5; ++b) buckets[b].label = std::to_string(b + 1);
  buckets[5].label = "6+";
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::set<Entity> p(pred[i].begin(), pred[i].end());
    for (std::size_t k = 0; k < ordered_gold[i].size(); ++k) {
      PositionBucket& b = buckets[std::min<std::size_t>(k, 5)];
      ++b.count;
      if (p.count(ordered_gold[i][k])) ++b.matched;
    }
  }
  for (PositionBucket& b : buckets) b.recall = b.count > 0 ? static_cast<double>(b.matched) / static_cast<double>(b.count) : 0.0;
  return buckets;
}

LengthStats length_stats(const Dataset& dataset, const std::vector<TokenizedSentence>& tokenized, Scheme scheme) {
  if (tokenized.size() != dataset.sentences.size()) throw ValidationError("length_stats: tokenization count mismatch");
  std::vector<int> lengths;
  for (std::size_t i = 0; i < dataset.sentences.size(); ++i)
    for (const Entity& e : dataset.sentences[i].entities) lengths.push_back(block_length(tokenized[i], e, scheme));
  if (lengths.empty()) throw Error("no entities");
  std::sort(lengths.begin(), lengths.end());
  LengthStats s;
  s.count = static_cast<long>(lengths.size());
  double sum = 0.0;
  for (int v : lengths) sum += v;
  s.mean = std::round(sum / static_cast<double>(lengths.size()) * 100.0) / 100.0;
  s.median = lengths[(lengths.size() - 1) / 2];
  return s;
}

InvalidReport invalid_report(const std::vector<InvalidCounts>& per_sentence) {
  InvalidReport r;
  for (const InvalidCounts& c : per_sentence) {
    r.e1_count += c.e1;
    r.e2_count += c.e2;
    r.e3_count += c.e3;
    r.total += c.raw;
    r.truncated += c.truncated;
  }
  r.empty = r.total == 0;
  if (!r.empty) {
    const double t = static_cast<double>(r.total);
    r.e1 = static_cast<double>(r.e1_count) / t;
    r.e2 = static_cast<double>(r.e2_count) / t;
    r.e3 = static_cast<double>(r.e3_count) / t;
  }
  return r;
}

EvalReport evaluate_predictions(const std::vector<EntitySet>& pred, const Dataset& gold,
                                const std::vector<TokenizedSentence>& tokenized, Scheme scheme,
                                const std::optional<std::vector<InvalidCounts>>& invalid) {
  std::vector<EntitySet> gold_sets;
  std::vector<EntitySet> ordered;
  for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
    gold_sets.push_back(gold.sentences[i].entities);
    ordered.push_back(sort_entities(gold.sentences[i].entities, tokenized.at(i), scheme, gold.tags));
  }
  EvalReport r;
  r.micro = span_f1(pred, gold_sets);
  r.per_tag = per_tag_f1(pred, gold_sets);
  r.discontinuous = discontinuous_f1(pred, gold_sets);
  r.positions = position_recall(pred, ordered);
  for (Scheme s : {Scheme::Span, Scheme::Bpe, Scheme::Word}) {
    try {
      r.lengths[std::string(scheme_name(s))] = length_stats(gold, tokenized, s);
    } catch (const Error&) {
      // entity-free gold: no length table
    }
  }
  if (invalid) r.invalid = invalid_report(*invalid);
  return r;
}

nlohmann::ordered_json to_json(const PRF& prf) {
  return {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1},
          {"tp", prf.tp},               {"predicted", prf.predicted}, {"gold", prf.gold}};
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["micro"] = to_json(report.micro);
  j["per_tag"] = nlohmann::ordered_json::object();
  for (const auto& [tag, prf] : report.per_tag) j["per_tag"][tag] = to_json(prf);
  j["discontinuous"] = to_json(report.discontinuous.score);
  j["discontinuous"]["empty"] = report.discontinuous.empty;
  j["position_recall"] = nlohmann::ordered_json::array();
  for (const PositionBucket& b : report.positions) {
    j["position_recall"].push_back({{"bucket", b.label}, {"count", b.count}, {"matched", b.matched}, {"recall", b.recall}});
  }
  j["length_stats"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : report.lengths) j["length_stats"][name] = {{"mean", s.mean}, {"median", s.median}, {"count", s.count}};
  if (report.invalid) {
    const InvalidReport& inv = *report.invalid;
    j["invalid"] = {{"E1", inv.e1},          {"E2", inv.e2},          {"E3", inv.e3},
                    {"E1_count", inv.e1_count}, {"E2_count", inv.e2_count}, {"E3_count", inv.e3_count},
                    {"total_predicted", inv.total}, {"truncated", inv.truncated}, {"empty", inv.empty}};
  }
  return j;
}

std::string position_recall_csv(const std::vector<PositionBucket>& buckets) {
  std::ostringstream out;
  out << "bucket,count,recall\n";
  out << std::setprecision(17);
  for (const PositionBucket& b : buckets) out << b.label << ',' << b.count << ',' << b.recall << '\n';
  return out.str();
}

}  // namespace ptrner
