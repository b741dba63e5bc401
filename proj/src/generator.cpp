#include "ptrner/generator.hpp"

#include <algorithm>
#include <optional>

#include "ptrner/errors.hpp"

namespace ptrner {

void GenConfig::validate() const {
  if (beam < 1) throw ValidationError("generation: beam must be >= 1");
  if (max_length < 0) throw ValidationError("generation: max_length must be >= 1 (or 0 for the default)");
}

namespace {

std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

TargetSequence make_sequence(const EncodedSource& source, const PointerModel& model, std::vector<int> indexes) {
  TargetSequence seq;
  seq.indexes = std::move(indexes);
  seq.n = static_cast<int>(source.tokens.size());
  seq.l = model.config.num_tags;
  return seq;
}

// Higher score first, then lexicographically smaller sequence.
bool ranks_before(double score_a, const std::vector<int>& seq_a, double score_b, const std::vector<int>& seq_b) {
  if (score_a != score_b) return score_a > score_b;
  return seq_a < seq_b;
}

struct Hypothesis {
  DecodingSession session;
  std::vector<int> indexes;
  std::vector<double> next;  // log-probs of the following step
  double score = 0.0;
};

// The decoder sees bos plus all but the last emitted index.
int step_limit(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg) {
  return std::min(cfg.resolve_max_length(static_cast<int>(source.tokens.size())), model.config.max_positions);
}

}  // namespace

Generation greedy(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg) {
  cfg.validate();
  const int limit = step_limit(model, source, cfg);
  DecodingSession session(model, source);
  std::vector<double> logp = session.feed(kBosToken);
  std::vector<int> out;
  double score = 0.0;
  bool finished = false;
  while (true) {
    const std::size_t k = argmax_lowest(logp);
    score += logp[k];
    if (k == static_cast<std::size_t>(kEosClass)) {
      finished = true;
      break;
    }
    out.push_back(static_cast<int>(k));
    if (static_cast<int>(out.size()) >= limit) break;
    logp = session.feed_index(static_cast<int>(k));
  }
  Generation g;
  g.sequence = make_sequence(source, model, std::move(out));
  g.score = score;
  g.finished = finished;
  return g;
}

Generation beam_search(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg) {
  cfg.validate();
  const int limit = step_limit(model, source, cfg);
  const std::size_t width = static_cast<std::size_t>(cfg.beam);

  std::vector<Hypothesis> alive;
  {
    DecodingSession s(model, source);
    std::vector<double> next = s.feed(kBosToken);
    alive.push_back({std::move(s), {}, std::move(next), 0.0});
  }
  std::vector<Generation> done;
  done.push_back(greedy(model, source, cfg));

  struct Candidate {
    std::size_t parent;
    int cls;
    double score;
    std::vector<int> seq;
  };

  while (!alive.empty()) {
    std::vector<Candidate> cands;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      for (std::size_t k = 0; k < alive[h].next.size(); ++k) {
        std::vector<int> seq = alive[h].indexes;
        seq.push_back(static_cast<int>(k));
        cands.push_back({h, static_cast<int>(k), alive[h].score + alive[h].next[k], std::move(seq)});
      }
    }
    const std::size_t keep = std::min(width, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Candidate& a, const Candidate& b) { return ranks_before(a.score, a.seq, b.score, b.seq); });
    cands.resize(keep);

    std::vector<Hypothesis> next_alive;
    for (Candidate& c : cands) {
      const Hypothesis& parent = alive[c.parent];
      if (c.cls == kEosClass) {
        Generation g;
        g.sequence = make_sequence(source, model, parent.indexes);
        g.score = c.score;
        g.finished = true;
        done.push_back(std::move(g));
        continue;
      }
      std::vector<int> indexes = parent.indexes;
      indexes.push_back(c.cls);
      if (static_cast<int>(indexes.size()) >= limit) {
        Generation g;
        g.sequence = make_sequence(source, model, std::move(indexes));
        g.score = c.score;
        done.push_back(std::move(g));
        continue;
      }
      Hypothesis child{parent.session, std::move(indexes), {}, c.score};
      child.next = child.session.feed_index(c.cls);
      next_alive.push_back(std::move(child));
    }
    alive = std::move(next_alive);

    // Scores only decrease along a hypothesis, so once the best finished
    // hypothesis outranks every live one the search cannot improve.
    const Generation& best_done = *std::min_element(done.begin(), done.end(), [](const Generation& a, const Generation& b) {
      return ranks_before(a.score, a.sequence.indexes, b.score, b.sequence.indexes);
    });
    const bool settled = std::all_of(alive.begin(), alive.end(), [&](const Hypothesis& h) {
      return best_done.score > h.score;
    });
    if (settled) break;
  }

  return *std::min_element(done.begin(), done.end(), [](const Generation& a, const Generation& b) {
    return ranks_before(a.score, a.sequence.indexes, b.score, b.sequence.indexes);
  });
}

Generation generate(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg) {
  return cfg.beam == 1 ? greedy(model, source, cfg) : beam_search(model, source, cfg);
}

Prediction predict_sentence(const PointerModel& model, const TokenizedSentence& sentence,
                            const std::vector<std::string>& tags, Scheme scheme, const GenConfig& cfg) {
  const EncodedSource source = encode(model, source_tokens(model.config, sentence));
  Prediction p;
  p.generation = generate(model, source, cfg);
  p.post = postprocess(p.generation.sequence, sentence, scheme, tags);
  return p;
}

}  // namespace ptrner
