#include "ptrner/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "ptrner/errors.hpp"
#include "ptrner/rng.hpp"

namespace ptrner {

void ModelConfig::validate() const {
  if (d <= 0 || heads <= 0 || ffn <= 0) throw ValidationError("model: d, heads and ffn must be positive");
  if (d % heads != 0) throw ValidationError("model: d must be divisible by heads");
  if (enc_layers < 0 || dec_layers < 0) throw ValidationError("model: negative layer count");
  if (alpha < 0.0 || alpha > 1.0) throw ValidationError("model: alpha must lie in [0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("model: dropout must lie in [0, 1)");
  if (num_pieces <= 0 || num_tags < 0) throw ValidationError("model: empty piece vocabulary");
  if (max_positions <= 0) throw ValidationError("model: max_positions must be positive");
  if (position_init != "sinusoidal" && position_init != "normal") {
    throw ValidationError("model: position_init must be 'sinusoidal' or 'normal'");
  }
}

nlohmann::ordered_json ModelConfig::to_json() const {
  return {{"d", d},
          {"enc_layers", enc_layers},
          {"dec_layers", dec_layers},
          {"heads", heads},
          {"ffn", ffn},
          {"num_pieces", num_pieces},
          {"num_tags", num_tags},
          {"vocab_size", vocab_size()},
          {"alpha", alpha},
          {"dropout", dropout},
          {"max_positions", max_positions},
          {"position_init", position_init}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d = j.at("d");
  c.enc_layers = j.at("enc_layers");
  c.dec_layers = j.at("dec_layers");
  c.heads = j.at("heads");
  c.ffn = j.at("ffn");
  c.num_pieces = j.at("num_pieces");
  c.num_tags = j.at("num_tags");
  c.alpha = j.at("alpha");
  c.dropout = j.at("dropout");
  c.max_positions = j.at("max_positions");
  c.position_init = j.value("position_init", c.position_init);
  return c;
}

PointerModel build_pointer_model(const ModelConfig& config) {
  config.validate();
  PointerModel m;
  m.config = config;
  const auto d = static_cast<std::size_t>(config.d);
  const auto heads = static_cast<std::size_t>(config.heads);
  const auto ffn = static_cast<std::size_t>(config.ffn);
  m.token_embedding = m.params.add("token_embedding", config.vocab_size(), d);
  m.encoder_positions = m.params.add("encoder.positions", config.max_positions, d);
  m.decoder_positions = m.params.add("decoder.positions", config.max_positions, d);
  m.encoder = nn::make_encoder(m.params, "encoder", config.enc_layers, d, heads, ffn);
  m.decoder = nn::make_decoder(m.params, "decoder", config.dec_layers, d, heads, ffn);
  m.head_hidden = nn::make_linear(m.params, "pointer_mlp.hidden", d, d);
  m.head_out = nn::make_linear(m.params, "pointer_mlp.out", d, d);
  return m;
}

namespace {

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

PointerModel make_pointer_model(const ModelConfig& config, std::uint64_t seed) {
  PointerModel m = build_pointer_model(config);
  std::mt19937_64 rng = SeedStreams(seed).stream("init");
  const double emb_std = 1.0 / std::sqrt(static_cast<double>(config.d));
  for (ParamId id = 0; id < m.params.size(); ++id) {
    const Parameter& p = m.params[id];
    if (ends_with(p.name, ".gain")) m.params.init_constant(id, 1.0);
    else if (ends_with(p.name, ".bias")) m.params.init_constant(id, 0.0);
    else if (ends_with(p.name, ".weight")) m.params.init_normal(id, 1.0 / std::sqrt(static_cast<double>(p.value.rows)), rng);
    else m.params.init_normal(id, emb_std, rng);
  }
  if (config.position_init == "sinusoidal") {
    m.params.init_sinusoidal(m.encoder_positions, 1.0);
    m.params.init_sinusoidal(m.decoder_positions, 1.0);
  }
  return m;
}

std::vector<int> source_tokens(const ModelConfig& config, const TokenizedSentence& sentence) {
  std::vector<int> out;
  out.reserve(sentence.piece_ids.size());
  for (int id : sentence.piece_ids) out.push_back(config.piece_token(id));
  return out;
}

int index2token(const ModelConfig& config, const std::vector<int>& tokens, int y) {
  const int n = static_cast<int>(tokens.size());
  if (y < 1 || y > n + config.num_tags) {
    throw ValidationError("index " + std::to_string(y) + " outside [1, " + std::to_string(n + config.num_tags) + "]");
  }
  return y <= n ? tokens[y - 1] : config.tag_token(y - n - 1);
}

namespace {

void check_length(const ModelConfig& c, std::size_t len, const char* what) {
  if (len > static_cast<std::size_t>(c.max_positions)) {
    throw ValidationError(std::string(what) + " length " + std::to_string(len) + " exceeds max_positions " +
                          std::to_string(c.max_positions));
  }
}

std::vector<int> decoder_inputs(const ModelConfig& c, const std::vector<int>& tokens, const std::vector<int>& prefix) {
  std::vector<int> in{kBosToken};
  for (int y : prefix) in.push_back(index2token(c, tokens, y));
  return in;
}

Matrix assemble_keys(const PointerModel& m, const Matrix& blended) {
  const ModelConfig& c = m.config;
  const Matrix& table = m.params.value(m.token_embedding);
  const std::size_t n = blended.rows;
  Matrix keys(1 + n + static_cast<std::size_t>(c.num_tags), static_cast<std::size_t>(c.d));
  std::copy_n(table.row(kEosToken).begin(), c.d, keys.row(0).begin());
  std::copy(blended.data.begin(), blended.data.end(), keys.row(1).begin());
  for (int k = 0; k < c.num_tags; ++k) {
    std::copy_n(table.row(static_cast<std::size_t>(c.tag_token(k))).begin(), c.d, keys.row(1 + n + k).begin());
  }
  return keys;
}

// Everything the backward pass needs from one teacher-forced forward pass.
struct ForwardPass {
  std::vector<int> dec_tokens;
  Matrix src_embeddings;
  Matrix enc_drop;
  nn::EncoderCache enc_cache;
  Matrix states;  // H_e
  Matrix head_pre;
  Matrix head_relu;
  Matrix keys;
  Matrix dec_drop;
  nn::DecoderCache dec_cache;
  Matrix dec_states;
  Matrix log_probs;  // T x classes
  std::vector<int> targets;
  double loss = 0.0;
};

void run_forward(const PointerModel& m, const std::vector<int>& tokens, const std::vector<int>& gold,
                 nn::RunMode& mode, ForwardPass& f) {
  const ModelConfig& c = m.config;
  const Matrix& table = m.params.value(m.token_embedding);
  check_length(c, tokens.size(), "source");
  check_length(c, gold.size() + 1, "target");

  f.src_embeddings = gather_rows(table, tokens);
  Matrix x = f.src_embeddings;
  add_row_prefix(x, m.params.value(m.encoder_positions));
  f.enc_drop = nn::dropout_mask(x.rows, x.cols, mode);
  nn::apply_mask(x, f.enc_drop);
  f.states = nn::encoder_forward(m.params, m.encoder, std::move(x), mode, &f.enc_cache);

  f.head_pre = nn::linear_forward(m.params, m.head_hidden, f.states);
  f.head_relu = f.head_pre;
  for (double& v : f.head_relu.data) v = v > 0.0 ? v : 0.0;
  const Matrix head = nn::linear_forward(m.params, m.head_out, f.head_relu);
  f.keys = assemble_keys(m, blend_pointer_states(m, head, f.src_embeddings));

  f.dec_tokens = decoder_inputs(c, tokens, gold);
  Matrix y = gather_rows(table, f.dec_tokens);
  add_row_prefix(y, m.params.value(m.decoder_positions));
  f.dec_drop = nn::dropout_mask(y.rows, y.cols, mode);
  nn::apply_mask(y, f.dec_drop);
  f.dec_states = nn::decoder_forward(m.params, m.decoder, std::move(y), f.states, mode, &f.dec_cache);

  f.log_probs = matmul_nt(f.dec_states, f.keys);
  f.targets = gold;
  f.targets.push_back(kEosClass);
  double total = 0.0;
  for (std::size_t t = 0; t < f.targets.size(); ++t) {
    auto row = f.log_probs.row(t);
    log_softmax_inplace(row);
    total -= row[static_cast<std::size_t>(f.targets[t])];
  }
  f.loss = total / static_cast<double>(f.targets.size());
}

void run_backward(PointerModel& m, const std::vector<int>& tokens, const ForwardPass& f, double weight) {
  const ModelConfig& c = m.config;
  ParameterSet& ps = m.params;
  const std::size_t n = tokens.size();
  const std::size_t steps = f.targets.size();

  Matrix dscores(steps, f.keys.rows);
  for (std::size_t t = 0; t < steps; ++t) {
    auto dr = dscores.row(t);
    const auto lp = f.log_probs.row(t);
    for (std::size_t k = 0; k < dr.size(); ++k) dr[k] = std::exp(lp[k]);
    dr[static_cast<std::size_t>(f.targets[t])] -= 1.0;
    for (double& v : dr) v *= weight / static_cast<double>(steps);
  }
  Matrix d_dec_states(steps, static_cast<std::size_t>(c.d));
  matmul_acc(dscores, f.keys, d_dec_states);
  Matrix d_keys(f.keys.rows, f.keys.cols);
  matmul_tn_acc(dscores, f.dec_states, d_keys);

  Matrix& d_table = ps.grad(m.token_embedding);
  axpy(1.0, d_keys.row(0), d_table.row(kEosToken));
  for (int k = 0; k < c.num_tags; ++k) axpy(1.0, d_keys.row(1 + n + k), d_table.row(static_cast<std::size_t>(c.tag_token(k))));

  Matrix d_head(n, static_cast<std::size_t>(c.d));
  Matrix d_src(n, static_cast<std::size_t>(c.d));
  for (std::size_t i = 0; i < n; ++i) {
    const auto db = d_keys.row(1 + i);
    auto dh = d_head.row(i);
    auto de = d_src.row(i);
    for (std::size_t k = 0; k < db.size(); ++k) {
      dh[k] = c.alpha * db[k];
      de[k] = (1.0 - c.alpha) * db[k];
    }
  }
  scatter_add_rows(d_table, tokens, d_src);

  Matrix d_relu = nn::linear_backward(ps, m.head_out, f.head_relu, d_head);
  for (std::size_t i = 0; i < d_relu.data.size(); ++i)
    if (f.head_pre.data[i] <= 0.0) d_relu.data[i] = 0.0;
  Matrix d_states = nn::linear_backward(ps, m.head_hidden, f.states, d_relu);

  nn::DecoderGrads dg = nn::decoder_backward(ps, m.decoder, f.dec_cache, f.states, std::move(d_dec_states));
  for (std::size_t i = 0; i < d_states.data.size(); ++i) d_states.data[i] += dg.d_memory.data[i];

  nn::apply_mask(dg.d_input, f.dec_drop);
  scatter_add_rows(d_table, f.dec_tokens, dg.d_input);
  Matrix& d_dec_pos = ps.grad(m.decoder_positions);
  for (std::size_t t = 0; t < dg.d_input.rows; ++t) axpy(1.0, dg.d_input.row(t), d_dec_pos.row(t));

  Matrix d_x = nn::encoder_backward(ps, m.encoder, f.enc_cache, std::move(d_states));
  nn::apply_mask(d_x, f.enc_drop);
  scatter_add_rows(d_table, tokens, d_x);
  Matrix& d_enc_pos = ps.grad(m.encoder_positions);
  for (std::size_t i = 0; i < n; ++i) axpy(1.0, d_x.row(i), d_enc_pos.row(i));
}

}  // namespace

EncodedSource encode(const PointerModel& model, const std::vector<int>& tokens) {
  check_length(model.config, tokens.size(), "source");
  if (tokens.empty()) throw ValidationError("encode: empty source");
  EncodedSource out;
  out.tokens = tokens;
  out.embeddings = gather_rows(model.params.value(model.token_embedding), tokens);
  Matrix x = out.embeddings;
  add_row_prefix(x, model.params.value(model.encoder_positions));
  nn::RunMode eval;
  out.states = nn::encoder_forward(model.params, model.encoder, std::move(x), eval, nullptr);
  return out;
}

Matrix pointer_head(const PointerModel& model, const Matrix& states) {
  Matrix hidden = nn::linear_forward(model.params, model.head_hidden, states);
  for (double& v : hidden.data) v = v > 0.0 ? v : 0.0;
  return nn::linear_forward(model.params, model.head_out, hidden);
}

Matrix blend_pointer_states(const PointerModel& model, const Matrix& head_output, const Matrix& embeddings) {
  const double a = model.config.alpha;
  const double b = 1.0 - a;
  Matrix out(head_output.rows, head_output.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * head_output.data[i] + b * embeddings.data[i];
  return out;
}

Matrix blend_pointer_states_two_pass(const PointerModel& model, const Matrix& head_output, const Matrix& embeddings) {
  const double a = model.config.alpha;
  const double b = 1.0 - a;
  Matrix out = head_output;
  for (double& v : out.data) v = a * v;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double scaled = b * embeddings.data[i];
    out.data[i] = out.data[i] + scaled;
  }
  return out;
}

Matrix pointer_keys(const PointerModel& model, const EncodedSource& source) {
  return assemble_keys(model, blend_pointer_states(model, pointer_head(model, source.states), source.embeddings));
}

std::vector<double> pointer_log_distribution(const Matrix& keys, std::span<const double> state) {
  std::vector<double> scores(keys.rows);
  for (std::size_t k = 0; k < keys.rows; ++k) scores[k] = dot(keys.row(k), state);
  log_softmax_inplace(scores);
  return scores;
}

StepDistribution pointer_distribution(const Matrix& keys, std::span<const double> state) {
  StepDistribution out;
  out.probs.resize(keys.rows);
  for (std::size_t k = 0; k < keys.rows; ++k) out.probs[k] = dot(keys.row(k), state);
  softmax_inplace(out.probs);
  return out;
}

Matrix decode_all(const PointerModel& model, const EncodedSource& source, const std::vector<int>& prefix) {
  check_length(model.config, prefix.size() + 1, "target");
  const std::vector<int> in = decoder_inputs(model.config, source.tokens, prefix);
  Matrix y = gather_rows(model.params.value(model.token_embedding), in);
  add_row_prefix(y, model.params.value(model.decoder_positions));
  nn::RunMode eval;
  return nn::decoder_forward(model.params, model.decoder, std::move(y), source.states, eval, nullptr);
}

std::vector<double> decode_step(const PointerModel& model, const EncodedSource& source, const std::vector<int>& prefix) {
  const Matrix all = decode_all(model, source, prefix);
  const auto last = all.row(all.rows - 1);
  return {last.begin(), last.end()};
}

double sequence_nll(const PointerModel& model, const std::vector<int>& tokens, const std::vector<int>& gold) {
  nn::RunMode eval;
  ForwardPass f;
  run_forward(model, tokens, gold, eval, f);
  return f.loss;
}

double sequence_nll_backward(PointerModel& model, const std::vector<int>& tokens, const std::vector<int>& gold,
                             double weight, nn::RunMode& mode) {
  ForwardPass f;
  run_forward(model, tokens, gold, mode, f);
  run_backward(model, tokens, f, weight);
  return f.loss;
}

double batch_loss(const PointerModel& model, const std::vector<PointerExample>& batch) {
  double total = 0.0;
  for (const PointerExample& ex : batch) total += sequence_nll(model, ex.tokens, ex.target);
  return total / static_cast<double>(batch.size());
}

GradCheckResult gradient_check(PointerModel& model, const std::vector<PointerExample>& batch, double epsilon,
                               std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ValidationError("gradient_check: at least one parameter sample is required");
  if (epsilon <= 0.0) throw ValidationError("gradient_check: epsilon must be positive");
  if (batch.empty()) throw ValidationError("gradient_check: empty batch");

  ParameterSet& ps = model.params;
  ps.zero_grad();
  nn::RunMode eval;
  for (const PointerExample& ex : batch) {
    sequence_nll_backward(model, ex.tokens, ex.target, 1.0 / static_cast<double>(batch.size()), eval);
  }

  std::mt19937_64 rng = SeedStreams(seed).stream("gradcheck");
  std::set<std::pair<ParamId, std::size_t>> chosen;
  const std::size_t total = ps.scalar_count();
  const std::size_t want = std::min(samples, total);
  for (std::size_t s = 0; chosen.size() < want; ++s) {
    const ParamId id = s % ps.size();
    std::uniform_int_distribution<std::size_t> pick(0, ps[id].value.size() - 1);
    chosen.insert({id, pick(rng)});
  }

  GradCheckResult result;
  for (const auto& [id, idx] : chosen) {
    double& v = ps[id].value.data[idx];
    const double saved = v;
    v = saved + epsilon;
    const double up = batch_loss(model, batch);
    v = saved - epsilon;
    const double down = batch_loss(model, batch);
    v = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double analytic = ps[id].grad.data[idx];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    const double rel = std::abs(analytic - numeric) / denom;
    ++result.checked;
    if (analytic != 0.0) ++result.nonzero;
    if (result.worst_parameter.empty() || rel > result.max_rel_error) {
      result.max_rel_error = rel;
      result.worst_parameter = ps[id].name + "[" + std::to_string(idx) + "]";
    }
  }
  return result;
}

DecodingSession::DecodingSession(const PointerModel& model, const EncodedSource& source)
    : model_(&model),
      source_(&source),
      keys_(std::make_shared<const Matrix>(pointer_keys(model, source))),
      state_(nn::decoder_start(model.params, model.decoder, source.states)) {}

std::vector<double> DecodingSession::feed(int token) {
  check_length(model_->config, state_.length + 1, "target");
  const std::size_t d = static_cast<std::size_t>(model_->config.d);
  std::vector<double> row(d);
  const auto emb = model_->params.value(model_->token_embedding).row(static_cast<std::size_t>(token));
  const auto pos = model_->params.value(model_->decoder_positions).row(state_.length);
  for (std::size_t k = 0; k < d; ++k) row[k] = emb[k] + pos[k];
  const std::vector<double> h = nn::decoder_step(model_->params, model_->decoder, state_, row);
  return pointer_log_distribution(*keys_, h);
}

}  // namespace ptrner
