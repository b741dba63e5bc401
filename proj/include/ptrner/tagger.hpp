#pragma once
// Sequence-labelling baselines: an MLP tag classifier and a linear-chain CRF
// on top of the same encoder the pointer model uses. Words are represented by
// the encoder state of their first piece. Flat entities only.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ptrner/corpus.hpp"
#include "ptrner/layers.hpp"
#include "ptrner/params.hpp"
#include "ptrner/tokenizer.hpp"

namespace ptrner {

// softmax(max(h wb + bb, 0) wa + ba) before the softmax, i.e. the logits.
// bb and ba are 1-row matrices.
Matrix mlp_emissions(const Matrix& h, const Matrix& wb, const Matrix& bb, const Matrix& wa, const Matrix& ba);
Matrix mlp_tag_distribution(const Matrix& h, const Matrix& wb, const Matrix& bb, const Matrix& wa, const Matrix& ba);

struct CrfParams {
  Matrix transitions;         // |T| x |T|, [from, to]
  std::vector<double> start;  // score of the first label

  std::size_t labels() const { return start.size(); }
  void validate() const;
};

// Emission scores are passed raw; every CRF function first replaces each row
// by its log-softmax and scores sequences on that.
Matrix crf_log_emissions(const Matrix& emissions);

// start[y0] + sum_i M[i, y_i] + sum_{i>0} T[y_{i-1}, y_i] on already-normalized M.
double crf_path_score(const Matrix& log_emissions, const CrfParams& crf, const std::vector<int>& path);

// log P(gold | emissions), forward algorithm in log space. Always <= 0.
double crf_log_likelihood(const Matrix& emissions, const CrfParams& crf, const std::vector<int>& gold);

struct CrfGradients {
  double log_likelihood = 0.0;
  Matrix d_emissions;  // of -log P, w.r.t. the raw emissions
  Matrix d_transitions;
  std::vector<double> d_start;
};

CrfGradients crf_nll_gradients(const Matrix& emissions, const CrfParams& crf, const std::vector<int>& gold);

struct ViterbiResult {
  std::vector<int> path;
  double score = 0.0;  // crf_path_score of path
};

// Ties go to the lowest label index at every backpointer and at the end.
ViterbiResult viterbi(const Matrix& emissions, const CrfParams& crf);

enum class TaggerKind { Mlp, Crf };

std::string_view tagger_kind_name(TaggerKind kind);

// "O" followed by "B-t", "I-t" for every tag t in vocabulary order.
std::vector<std::string> bio_labels(const std::vector<std::string>& tags);

struct TaggerConfig {
  TaggerKind kind = TaggerKind::Mlp;
  int d = 64;
  int layers = 2;
  int heads = 4;
  int ffn = 128;
  int hidden = 64;  // width of the emission MLP
  double dropout = 0.1;
  int max_positions = 256;
  std::string position_init = "sinusoidal";
  int num_pieces = 0;
  int num_labels = 0;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TaggerConfig from_json(const nlohmann::json& j);
};

struct TaggerModel {
  TaggerConfig config;
  ParameterSet params;
  ParamId token_embedding = 0;  // num_pieces x d
  ParamId positions = 0;
  nn::Encoder encoder;
  nn::Linear proj_b;  // d -> hidden
  nn::Linear proj_a;  // hidden -> labels
  ParamId transitions = 0;  // CRF only
  ParamId start = 0;        // CRF only, 1 x labels
};

TaggerModel build_tagger(const TaggerConfig& config);
TaggerModel make_tagger(const TaggerConfig& config, std::uint64_t seed);

struct TaggerExample {
  std::vector<int> pieces;       // vocabulary ids
  std::vector<int> word_starts;  // 0-based piece index of each word's first piece
  std::vector<int> labels;       // per word; empty when unlabelled
};

TaggerExample make_tagger_example(const TokenizedSentence& sentence);

// Raw per-word emission scores (eval mode).
Matrix tagger_emissions(const TaggerModel& model, const TaggerExample& ex);

// Per-word mean negative log-likelihood; accumulates weight * gradient.
double tagger_loss_backward(TaggerModel& model, const TaggerExample& ex, double weight, nn::RunMode& mode);
double tagger_loss(const TaggerModel& model, const TaggerExample& ex);

// Argmax labels (MLP) or the Viterbi path (CRF).
std::vector<int> tagger_decode(const TaggerModel& model, const TaggerExample& ex);

// Labelled examples for a dataset; throws ValidationError naming the sentence
// when its entities have no BIO encoding.
std::vector<TaggerExample> tagger_examples(const Dataset& dataset, const BpeVocab& vocab,
                                           const std::vector<std::string>& labels);

EntitySet tagger_entities(const std::vector<int>& label_ids, const std::vector<std::string>& labels);

}  // namespace ptrner
