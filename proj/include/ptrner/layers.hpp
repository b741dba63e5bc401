#pragma once
// Transformer building blocks with explicit forward caches and exact
// backward passes. Pre-layer-norm residual blocks; the final norm of a stack
// is applied only when the stack has at least one layer.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ptrner/matrix.hpp"
#include "ptrner/params.hpp"

namespace ptrner::nn {

struct RunMode {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  bool dropout_active() const { return training && dropout > 0.0 && rng != nullptr; }
};

// Inverted-dropout mask (entries 0 or 1/(1-p)); empty when dropout is off.
Matrix dropout_mask(std::size_t rows, std::size_t cols, RunMode& mode);
void apply_mask(Matrix& x, const Matrix& mask);

struct Linear {
  ParamId weight = 0;  // in x out
  ParamId bias = 0;    // 1 x out
  std::size_t in = 0, out = 0;
};

Linear make_linear(ParameterSet& ps, const std::string& name, std::size_t in, std::size_t out);
Matrix linear_forward(const ParameterSet& ps, const Linear& lin, const Matrix& x);
// Accumulates weight/bias gradients and returns dL/dx.
Matrix linear_backward(ParameterSet& ps, const Linear& lin, const Matrix& x, const Matrix& dy);

struct LayerNorm {
  ParamId gain = 0, bias = 0;
  std::size_t dim = 0;
};

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> rstd;
};

LayerNorm make_layer_norm(ParameterSet& ps, const std::string& name, std::size_t dim);
Matrix layer_norm_forward(const ParameterSet& ps, const LayerNorm& ln, const Matrix& x, LayerNormCache* cache);
Matrix layer_norm_backward(ParameterSet& ps, const LayerNorm& ln, const LayerNormCache& cache, const Matrix& dy);

struct Attention {
  Linear q, k, v, o;
  std::size_t heads = 1;
};

struct AttentionCache {
  Matrix q, k, v, ctx;
  Matrix probs;  // tq x (heads * tk)
};

Attention make_attention(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t heads);

// Scaled dot-product attention of one query row against the first `count`
// rows of k/v. probs receives heads*count weights; ctx receives d values.
void attend_row(const double* q, const Matrix& k, const Matrix& v, std::size_t count, std::size_t heads,
                double* probs, double* ctx);

Matrix attention_forward(const ParameterSet& ps, const Attention& att, const Matrix& q_in, const Matrix& kv_in,
                         bool causal, AttentionCache* cache);

struct AttentionGrads {
  Matrix d_q_in;
  Matrix d_kv_in;
};

AttentionGrads attention_backward(ParameterSet& ps, const Attention& att, const AttentionCache& cache,
                                  const Matrix& q_in, const Matrix& kv_in, const Matrix& d_out, bool causal);

struct FeedForward {
  Linear up, down;
};

struct FeedForwardCache {
  Matrix pre;
  Matrix hidden;
};

FeedForward make_feed_forward(ParameterSet& ps, const std::string& name, std::size_t d, std::size_t hidden);
Matrix feed_forward(const ParameterSet& ps, const FeedForward& ff, const Matrix& x, FeedForwardCache* cache);
Matrix feed_forward_backward(ParameterSet& ps, const FeedForward& ff, const FeedForwardCache& cache, const Matrix& x,
                             const Matrix& dy);

struct EncoderLayer {
  LayerNorm ln_attn;
  Attention attn;
  LayerNorm ln_ffn;
  FeedForward ffn;
};

struct Encoder {
  std::vector<EncoderLayer> layers;
  LayerNorm final_norm;
};

struct EncoderLayerCache {
  LayerNormCache ln_attn;
  Matrix a;  // normed input to attention
  AttentionCache attn;
  Matrix drop_attn;
  LayerNormCache ln_ffn;
  Matrix b;  // normed input to the feed-forward block
  FeedForwardCache ffn;
  Matrix drop_ffn;
};

struct EncoderCache {
  std::vector<EncoderLayerCache> layers;
  LayerNormCache final_norm;
};

Encoder make_encoder(ParameterSet& ps, const std::string& name, std::size_t layers, std::size_t d, std::size_t heads,
                     std::size_t ffn);
Matrix encoder_forward(const ParameterSet& ps, const Encoder& enc, Matrix x, RunMode& mode, EncoderCache* cache);
Matrix encoder_backward(ParameterSet& ps, const Encoder& enc, const EncoderCache& cache, Matrix dh);

struct DecoderLayer {
  LayerNorm ln_self;
  Attention self_attn;
  LayerNorm ln_cross;
  Attention cross_attn;
  LayerNorm ln_ffn;
  FeedForward ffn;
};

struct Decoder {
  std::vector<DecoderLayer> layers;
  LayerNorm final_norm;
};

struct DecoderLayerCache {
  LayerNormCache ln_self;
  Matrix a;
  AttentionCache self_attn;
  Matrix drop_self;
  LayerNormCache ln_cross;
  Matrix c;
  AttentionCache cross_attn;
  Matrix drop_cross;
  LayerNormCache ln_ffn;
  Matrix b;
  FeedForwardCache ffn;
  Matrix drop_ffn;
};

struct DecoderCache {
  std::vector<DecoderLayerCache> layers;
  LayerNormCache final_norm;
};

struct DecoderGrads {
  Matrix d_input;
  Matrix d_memory;
};

Decoder make_decoder(ParameterSet& ps, const std::string& name, std::size_t layers, std::size_t d, std::size_t heads,
                     std::size_t ffn);
Matrix decoder_forward(const ParameterSet& ps, const Decoder& dec, Matrix y, const Matrix& memory, RunMode& mode,
                       DecoderCache* cache);
DecoderGrads decoder_backward(ParameterSet& ps, const Decoder& dec, const DecoderCache& cache, const Matrix& memory,
                              Matrix dh);

// Key/value cache for step-by-step decoding in eval mode. Each step yields the
// same row decoder_forward would produce at that position.
struct DecoderState {
  std::vector<Matrix> self_k, self_v;    // grown one row per step
  std::vector<Matrix> cross_k, cross_v;  // fixed, from the encoder memory
  std::size_t length = 0;
};

DecoderState decoder_start(const ParameterSet& ps, const Decoder& dec, const Matrix& memory);
std::vector<double> decoder_step(const ParameterSet& ps, const Decoder& dec, DecoderState& state,
                                 std::span<const double> input_row);

}  // namespace ptrner::nn
