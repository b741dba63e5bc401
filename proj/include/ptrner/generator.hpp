#pragma once
// Autoregressive decoding over the eos / pointer / tag class space.

#include <string>
#include <vector>

#include "ptrner/linearizer.hpp"
#include "ptrner/model.hpp"

namespace ptrner {

struct GenConfig {
  int beam = 1;
  int max_length = 0;  // 0 selects 2 * n + 10

  int resolve_max_length(int n) const { return max_length > 0 ? max_length : 2 * n + 10; }
  void validate() const;
};

struct Generation {
  TargetSequence sequence;  // eos stripped
  double score = 0.0;       // summed log-probabilities of the emitted steps, eos included
  bool finished = false;    // ended on eos rather than the length cap
};

// Argmax at every step; ties go to the lowest class id.
Generation greedy(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg);

// Beam search over raw summed log-probabilities (no length normalisation).
// Ties between equal scores go to the lexicographically smaller index
// sequence. The greedy hypothesis always competes in the final selection, so
// a wider beam never returns a lower score than greedy.
Generation beam_search(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg);

// Dispatches on cfg.beam (1 = greedy).
Generation generate(const PointerModel& model, const EncodedSource& source, const GenConfig& cfg);

struct Prediction {
  Generation generation;
  Postprocessed post;
};

// Encodes, generates and post-processes one tokenized sentence.
Prediction predict_sentence(const PointerModel& model, const TokenizedSentence& sentence,
                            const std::vector<std::string>& tags, Scheme scheme, const GenConfig& cfg);

}  // namespace ptrner
