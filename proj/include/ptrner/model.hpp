#pragma once
// Encoder-decoder with a pointer head.
//
// Output classes at every step: 0 = eos, 1..n = pointer to source piece,
// n+1..n+l = tag. A gold index y is therefore also its own class id.
//
// The shared token table holds, in order: bos, eos, every vocabulary piece,
// every tag token.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptrner/layers.hpp"
#include "ptrner/params.hpp"
#include "ptrner/tokenizer.hpp"

namespace ptrner {

inline constexpr int kBosToken = 0;
inline constexpr int kEosToken = 1;
inline constexpr int kEosClass = 0;

struct ModelConfig {
  int d = 64;
  int enc_layers = 2;
  int dec_layers = 2;
  int heads = 4;
  int ffn = 128;
  int num_pieces = 0;
  int num_tags = 0;
  double alpha = 0.5;
  double dropout = 0.1;
  int max_positions = 256;
  // Starting values of the learned position tables: "sinusoidal" (unit
  // amplitude) or "normal".
  std::string position_init = "sinusoidal";

  int vocab_size() const { return num_pieces + num_tags + 2; }
  int piece_token(int piece_id) const { return 2 + piece_id; }
  int tag_token(int tag_position) const { return 2 + num_pieces + tag_position; }

  // Throws ValidationError.
  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct PointerModel {
  ModelConfig config;
  ParameterSet params;
  ParamId token_embedding = 0;  // vocab_size x d, shared everywhere
  ParamId encoder_positions = 0;
  ParamId decoder_positions = 0;
  nn::Encoder encoder;
  nn::Decoder decoder;
  nn::Linear head_hidden;  // pointer MLP, first affine layer
  nn::Linear head_out;     // pointer MLP, second affine layer
};

// Allocates all tensors (zero-valued).
PointerModel build_pointer_model(const ModelConfig& config);
// Allocates and randomly initializes from `seed`.
PointerModel make_pointer_model(const ModelConfig& config, std::uint64_t seed);

// Embedding-table ids of a tokenized sentence's pieces.
std::vector<int> source_tokens(const ModelConfig& config, const TokenizedSentence& sentence);

struct EncodedSource {
  std::vector<int> tokens;
  Matrix states;      // H_e, n x d
  Matrix embeddings;  // E_e: raw token embeddings of the pieces, n x d
};

// Eval-mode encoding. Throws ValidationError when n exceeds max_positions.
EncodedSource encode(const PointerModel& model, const std::vector<int>& tokens);

// Token fed back to the decoder for a generated index y in [1, n + l].
int index2token(const ModelConfig& config, const std::vector<int>& tokens, int y);

// alpha * MLP(H_e) + (1 - alpha) * E_e, computed in one pass.
Matrix blend_pointer_states(const PointerModel& model, const Matrix& head_output, const Matrix& embeddings);
// Same blend in two passes (scale, then accumulate).
Matrix blend_pointer_states_two_pass(const PointerModel& model, const Matrix& head_output, const Matrix& embeddings);

Matrix pointer_head(const PointerModel& model, const Matrix& states);

// Rows scored against the decoder state: [eos ; blended source ; tag tokens].
Matrix pointer_keys(const PointerModel& model, const EncodedSource& source);

struct StepDistribution {
  std::vector<double> probs;  // size 1 + n + l
};

StepDistribution pointer_distribution(const Matrix& keys, std::span<const double> state);
std::vector<double> pointer_log_distribution(const Matrix& keys, std::span<const double> state);

// Decoder state after reading [bos] ++ index2token(prefix).
std::vector<double> decode_step(const PointerModel& model, const EncodedSource& source, const std::vector<int>& prefix);

// Teacher-forced states for every step of [bos] ++ index2token(prefix).
Matrix decode_all(const PointerModel& model, const EncodedSource& source, const std::vector<int>& prefix);

// Mean per-step negative log-likelihood of gold ++ [eos], eval mode.
double sequence_nll(const PointerModel& model, const std::vector<int>& tokens, const std::vector<int>& gold);

// Same loss; accumulates `weight` * gradient into model.params.
double sequence_nll_backward(PointerModel& model, const std::vector<int>& tokens, const std::vector<int>& gold,
                             double weight, nn::RunMode& mode);

struct PointerExample {
  std::vector<int> tokens;
  std::vector<int> target;
};

// Mean of sequence_nll over the examples.
double batch_loss(const PointerModel& model, const std::vector<PointerExample>& batch);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t nonzero = 0;  // samples whose analytic gradient is not exactly 0
  std::string worst_parameter;
};

// Central finite differences of batch_loss at `samples` coordinates, spread
// round-robin over all tensors. Relative error is |a - f| / max(|a|, |f|, 1e-6).
GradCheckResult gradient_check(PointerModel& model, const std::vector<PointerExample>& batch, double epsilon,
                               std::size_t samples, std::uint64_t seed);

// Step-by-step decoding over a cached decoder state.
class DecodingSession {
 public:
  DecodingSession(const PointerModel& model, const EncodedSource& source);

  // Log-probabilities of the next class after feeding `token`.
  std::vector<double> feed(int token);
  // Feeds the token for generated index y.
  std::vector<double> feed_index(int y) { return feed(index2token(model_->config, source_->tokens, y)); }
  std::size_t length() const { return state_.length; }

 private:
  const PointerModel* model_;
  const EncodedSource* source_;
  std::shared_ptr<const Matrix> keys_;
  nn::DecoderState state_;
};

}  // namespace ptrner
