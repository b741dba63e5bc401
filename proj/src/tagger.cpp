#include "ptrner/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "ptrner/errors.hpp"
#include "ptrner/rng.hpp"

namespace ptrner {

namespace {

void relu_inplace(Matrix& m) {
  for (double& v : m.data) v = v > 0.0 ? v : 0.0;
}

void add_bias(Matrix& x, const Matrix& bias) {
  for (std::size_t i = 0; i < x.rows; ++i) axpy(1.0, bias.row(0), x.row(i));
}

double lse2(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

Matrix mlp_emissions(const Matrix& h, const Matrix& wb, const Matrix& bb, const Matrix& wa, const Matrix& ba) {
  Matrix hidden = matmul(h, wb);
  add_bias(hidden, bb);
  relu_inplace(hidden);
  Matrix out = matmul(hidden, wa);
  add_bias(out, ba);
  return out;
}

Matrix mlp_tag_distribution(const Matrix& h, const Matrix& wb, const Matrix& bb, const Matrix& wa, const Matrix& ba) {
  Matrix p = mlp_emissions(h, wb, bb, wa, ba);
  for (std::size_t i = 0; i < p.rows; ++i) softmax_inplace(p.row(i));
  return p;
}

void CrfParams::validate() const {
  if (start.empty()) throw ValidationError("crf: at least one label is required");
  if (transitions.rows != start.size() || transitions.cols != start.size()) {
    throw ValidationError("crf: transition matrix must be square over the label set");
  }
}

Matrix crf_log_emissions(const Matrix& emissions) {
  Matrix m = emissions;
  for (std::size_t i = 0; i < m.rows; ++i) log_softmax_inplace(m.row(i));
  return m;
}

double crf_path_score(const Matrix& log_emissions, const CrfParams& crf, const std::vector<int>& path) {
  if (path.size() != log_emissions.rows || path.empty()) throw ValidationError("crf: path length must equal n >= 1");
  double s = crf.start[static_cast<std::size_t>(path[0])];
  for (std::size_t i = 0; i < path.size(); ++i) {
    s += log_emissions(i, static_cast<std::size_t>(path[i]));
    if (i > 0) s += crf.transitions(static_cast<std::size_t>(path[i - 1]), static_cast<std::size_t>(path[i]));
  }
  return s;
}

namespace {

// alpha(i, t): log-sum of all prefixes ending in t at i.
Matrix forward_scores(const Matrix& lm, const CrfParams& crf) {
  const std::size_t n = lm.rows, k = crf.labels();
  Matrix alpha(n, k);
  for (std::size_t t = 0; t < k; ++t) alpha(0, t) = crf.start[t] + lm(0, t);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      double acc = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < k; ++s) acc = lse2(acc, alpha(i - 1, s) + crf.transitions(s, t));
      alpha(i, t) = acc + lm(i, t);
    }
  }
  return alpha;
}

// beta(i, s): log-sum of all suffixes after position i given label s at i.
Matrix backward_scores(const Matrix& lm, const CrfParams& crf) {
  const std::size_t n = lm.rows, k = crf.labels();
  Matrix beta(n, k);
  for (std::size_t i = n - 1; i-- > 0;) {
    for (std::size_t s = 0; s < k; ++s) {
      double acc = -std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < k; ++t) acc = lse2(acc, crf.transitions(s, t) + lm(i + 1, t) + beta(i + 1, t));
      beta(i, s) = acc;
    }
  }
  return beta;
}

void check_crf_input(const Matrix& emissions, const CrfParams& crf) {
  crf.validate();
  if (emissions.rows == 0) throw ValidationError("crf: empty sequence");
  if (emissions.cols != crf.labels()) throw ValidationError("crf: emission width does not match the label count");
}

}  // namespace

double crf_log_likelihood(const Matrix& emissions, const CrfParams& crf, const std::vector<int>& gold) {
  check_crf_input(emissions, crf);
  const Matrix lm = crf_log_emissions(emissions);
  const Matrix alpha = forward_scores(lm, crf);
  return crf_path_score(lm, crf, gold) - log_sum_exp(alpha.row(lm.rows - 1));
}

CrfGradients crf_nll_gradients(const Matrix& emissions, const CrfParams& crf, const std::vector<int>& gold) {
  check_crf_input(emissions, crf);
  const std::size_t n = emissions.rows, k = crf.labels();
  const Matrix lm = crf_log_emissions(emissions);
  const Matrix alpha = forward_scores(lm, crf);
  const Matrix beta = backward_scores(lm, crf);
  const double log_z = log_sum_exp(alpha.row(n - 1));

  CrfGradients g;
  g.log_likelihood = crf_path_score(lm, crf, gold) - log_z;
  g.d_transitions = Matrix(k, k);
  g.d_start.assign(k, 0.0);
  Matrix d_lm(n, k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < k; ++t) d_lm(i, t) = std::exp(alpha(i, t) + beta(i, t) - log_z);
  for (std::size_t t = 0; t < k; ++t) g.d_start[t] = d_lm(0, t);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t s = 0; s < k; ++s)
      for (std::size_t t = 0; t < k; ++t)
        g.d_transitions(s, t) += std::exp(alpha(i - 1, s) + crf.transitions(s, t) + lm(i, t) + beta(i, t) - log_z);

  g.d_start[static_cast<std::size_t>(gold[0])] -= 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    d_lm(i, static_cast<std::size_t>(gold[i])) -= 1.0;
    if (i > 0) g.d_transitions(static_cast<std::size_t>(gold[i - 1]), static_cast<std::size_t>(gold[i])) -= 1.0;
  }

  // Through the row-wise log-softmax: dM = dL - softmax(M) * sum(dL).
  g.d_emissions = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t t = 0; t < k; ++t) row_sum += d_lm(i, t);
    for (std::size_t t = 0; t < k; ++t) g.d_emissions(i, t) = d_lm(i, t) - std::exp(lm(i, t)) * row_sum;
  }
  return g;
}

ViterbiResult viterbi(const Matrix& emissions, const CrfParams& crf) {
  check_crf_input(emissions, crf);
  const std::size_t n = emissions.rows, k = crf.labels();
  const Matrix lm = crf_log_emissions(emissions);
  Matrix delta(n, k);
  std::vector<std::vector<int>> back(n, std::vector<int>(k, 0));
  for (std::size_t t = 0; t < k; ++t) delta(0, t) = crf.start[t] + lm(0, t);
  for (std::size_t i = 1; i < n; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      std::size_t arg = 0;
      double best = delta(i - 1, 0) + crf.transitions(0, t);
      for (std::size_t s = 1; s < k; ++s) {
        const double v = delta(i - 1, s) + crf.transitions(s, t);
        if (v > best) {
          best = v;
          arg = s;
        }
      }
      delta(i, t) = best + lm(i, t);
      back[i][t] = static_cast<int>(arg);
    }
  }
  std::size_t last = 0;
  for (std::size_t t = 1; t < k; ++t)
    if (delta(n - 1, t) > delta(n - 1, last)) last = t;
  ViterbiResult r;
  r.path.assign(n, 0);
  r.path[n - 1] = static_cast<int>(last);
  for (std::size_t i = n - 1; i > 0; --i) r.path[i - 1] = back[i][static_cast<std::size_t>(r.path[i])];
  r.score = crf_path_score(lm, crf, r.path);
  return r;
}

std::string_view tagger_kind_name(TaggerKind kind) { return kind == TaggerKind::Crf ? "tagger-crf" : "tagger"; }

std::vector<std::string> bio_labels(const std::vector<std::string>& tags) {
  std::vector<std::string> out{"O"};
  for (const std::string& t : tags) {
    out.push_back("B-" + t);
    out.push_back("I-" + t);
  }
  return out;
}

void TaggerConfig::validate() const {
  if (d < 1 || heads < 1 || d % heads != 0) throw ValidationError("tagger: d must be a positive multiple of heads");
  if (layers < 0 || ffn < 1 || hidden < 1) throw ValidationError("tagger: invalid layer sizes");
  if (dropout < 0.0 || dropout >= 1.0) throw ValidationError("tagger: dropout must lie in [0, 1)");
  if (max_positions < 1 || num_pieces < 1 || num_labels < 1) throw ValidationError("tagger: empty vocabulary or label set");
  if (position_init != "sinusoidal" && position_init != "normal") {
    throw ValidationError("tagger: position_init must be 'sinusoidal' or 'normal'");
  }
}

nlohmann::ordered_json TaggerConfig::to_json() const {
  return {{"kind", tagger_kind_name(kind)}, {"d", d},           {"layers", layers},
          {"heads", heads},                 {"ffn", ffn},       {"hidden", hidden},
          {"dropout", dropout},             {"max_positions", max_positions},
          {"position_init", position_init},
          {"num_pieces", num_pieces},       {"num_labels", num_labels}};
}

TaggerConfig TaggerConfig::from_json(const nlohmann::json& j) {
  TaggerConfig c;
  const std::string kind = j.at("kind");
  if (kind == "tagger") c.kind = TaggerKind::Mlp;
  else if (kind == "tagger-crf") c.kind = TaggerKind::Crf;
  else throw ValidationError("tagger: unknown kind '" + kind + "'");
  c.d = j.at("d");
  c.layers = j.at("layers");
  c.heads = j.at("heads");
  c.ffn = j.at("ffn");
  c.hidden = j.at("hidden");
  c.dropout = j.at("dropout");
  c.max_positions = j.at("max_positions");
  c.position_init = j.value("position_init", c.position_init);
  c.num_pieces = j.at("num_pieces");
  c.num_labels = j.at("num_labels");
  return c;
}

TaggerModel build_tagger(const TaggerConfig& config) {
  config.validate();
  TaggerModel m;
  m.config = config;
  const auto d = static_cast<std::size_t>(config.d);
  const auto labels = static_cast<std::size_t>(config.num_labels);
  m.token_embedding = m.params.add("embedding.tokens", static_cast<std::size_t>(config.num_pieces), d);
  m.positions = m.params.add("encoder.positions", static_cast<std::size_t>(config.max_positions), d);
  m.encoder = nn::make_encoder(m.params, "encoder", static_cast<std::size_t>(config.layers), d,
                               static_cast<std::size_t>(config.heads), static_cast<std::size_t>(config.ffn));
  m.proj_b = nn::make_linear(m.params, "tagger.hidden", d, static_cast<std::size_t>(config.hidden));
  m.proj_a = nn::make_linear(m.params, "tagger.out", static_cast<std::size_t>(config.hidden), labels);
  if (config.kind == TaggerKind::Crf) {
    m.transitions = m.params.add("crf.transitions", labels, labels);
    m.start = m.params.add("crf.start", 1, labels);
  }
  return m;
}

TaggerModel make_tagger(const TaggerConfig& config, std::uint64_t seed) {
  TaggerModel m = build_tagger(config);
  std::mt19937_64 rng = SeedStreams(seed).stream("init");
  for (ParamId id = 0; id < m.params.size(); ++id) {
    const std::string& name = m.params[id].name;
    const Matrix& v = m.params.value(id);
    auto ends_with = [&](std::string_view s) {
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".gain")) m.params.init_constant(id, 1.0);
    else if (ends_with(".bias") || name.rfind("crf.", 0) == 0) m.params.init_constant(id, 0.0);
    else if (ends_with(".weight")) m.params.init_normal(id, 1.0 / std::sqrt(static_cast<double>(v.rows)), rng);
    else m.params.init_normal(id, 1.0 / std::sqrt(static_cast<double>(config.d)), rng);
  }
  if (config.position_init == "sinusoidal") m.params.init_sinusoidal(m.positions, 1.0);
  return m;
}

TaggerExample make_tagger_example(const TokenizedSentence& sentence) {
  TaggerExample ex;
  ex.pieces = sentence.piece_ids;
  for (const auto& [first, last] : sentence.word_spans) ex.word_starts.push_back(first - 1);
  return ex;
}

namespace {

struct TaggerPass {
  Matrix enc_drop;
  nn::EncoderCache enc_cache;
  Matrix words;  // first-piece states
  Matrix pre;    // hidden pre-activation
  Matrix hidden;
  Matrix emissions;
};

void tagger_forward(const TaggerModel& m, const TaggerExample& ex, nn::RunMode& mode, TaggerPass& f) {
  if (ex.pieces.size() > static_cast<std::size_t>(m.config.max_positions)) {
    throw ValidationError("source length " + std::to_string(ex.pieces.size()) + " exceeds max_positions " +
                          std::to_string(m.config.max_positions));
  }
  if (ex.pieces.empty()) throw ValidationError("tagger: empty sentence");
  Matrix x = gather_rows(m.params.value(m.token_embedding), ex.pieces);
  add_row_prefix(x, m.params.value(m.positions));
  f.enc_drop = nn::dropout_mask(x.rows, x.cols, mode);
  nn::apply_mask(x, f.enc_drop);
  const Matrix states = nn::encoder_forward(m.params, m.encoder, std::move(x), mode, &f.enc_cache);
  f.words = gather_rows(states, ex.word_starts);
  f.pre = nn::linear_forward(m.params, m.proj_b, f.words);
  f.hidden = f.pre;
  relu_inplace(f.hidden);
  f.emissions = nn::linear_forward(m.params, m.proj_a, f.hidden);
}

CrfParams crf_of(const TaggerModel& m) {
  CrfParams crf;
  crf.transitions = m.params.value(m.transitions);
  const Matrix& s = m.params.value(m.start);
  crf.start.assign(s.data.begin(), s.data.end());
  return crf;
}

}  // namespace

Matrix tagger_emissions(const TaggerModel& model, const TaggerExample& ex) {
  nn::RunMode eval;
  TaggerPass f;
  tagger_forward(model, ex, eval, f);
  return f.emissions;
}

double tagger_loss_backward(TaggerModel& m, const TaggerExample& ex, double weight, nn::RunMode& mode) {
  if (ex.labels.size() != ex.word_starts.size()) throw ValidationError("tagger: example is not labelled");
  TaggerPass f;
  tagger_forward(m, ex, mode, f);
  const std::size_t n = ex.labels.size();
  const double scale = weight / static_cast<double>(n);
  double loss = 0.0;
  Matrix d_em(n, f.emissions.cols);
  if (m.config.kind == TaggerKind::Crf) {
    const CrfGradients g = crf_nll_gradients(f.emissions, crf_of(m), ex.labels);
    loss = -g.log_likelihood / static_cast<double>(n);
    for (std::size_t i = 0; i < d_em.data.size(); ++i) d_em.data[i] = scale * g.d_emissions.data[i];
    axpy(scale, g.d_transitions.data, m.params.grad(m.transitions).data);
    axpy(scale, g.d_start, m.params.grad(m.start).data);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      auto lp = f.emissions.row(i);
      std::vector<double> row(lp.begin(), lp.end());
      log_softmax_inplace(row);
      const auto y = static_cast<std::size_t>(ex.labels[i]);
      loss -= row[y];
      auto dr = d_em.row(i);
      for (std::size_t t = 0; t < row.size(); ++t) dr[t] = scale * (std::exp(row[t]) - (t == y ? 1.0 : 0.0));
    }
    loss /= static_cast<double>(n);
  }

  Matrix d_hidden = nn::linear_backward(m.params, m.proj_a, f.hidden, d_em);
  for (std::size_t i = 0; i < d_hidden.data.size(); ++i)
    if (f.pre.data[i] <= 0.0) d_hidden.data[i] = 0.0;
  const Matrix d_words = nn::linear_backward(m.params, m.proj_b, f.words, d_hidden);
  Matrix d_states(ex.pieces.size(), static_cast<std::size_t>(m.config.d));
  scatter_add_rows(d_states, ex.word_starts, d_words);
  Matrix d_x = nn::encoder_backward(m.params, m.encoder, f.enc_cache, std::move(d_states));
  nn::apply_mask(d_x, f.enc_drop);
  scatter_add_rows(m.params.grad(m.token_embedding), ex.pieces, d_x);
  Matrix& d_pos = m.params.grad(m.positions);
  for (std::size_t i = 0; i < d_x.rows; ++i) axpy(1.0, d_x.row(i), d_pos.row(i));
  return loss;
}

double tagger_loss(const TaggerModel& model, const TaggerExample& ex) {
  const Matrix em = tagger_emissions(model, ex);
  const std::size_t n = ex.labels.size();
  if (model.config.kind == TaggerKind::Crf) return -crf_log_likelihood(em, crf_of(model), ex.labels) / static_cast<double>(n);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(em.row(i).begin(), em.row(i).end());
    log_softmax_inplace(row);
    loss -= row[static_cast<std::size_t>(ex.labels[i])];
  }
  return loss / static_cast<double>(n);
}

std::vector<int> tagger_decode(const TaggerModel& model, const TaggerExample& ex) {
  const Matrix em = tagger_emissions(model, ex);
  if (model.config.kind == TaggerKind::Crf) return viterbi(em, crf_of(model)).path;
  std::vector<int> out;
  for (std::size_t i = 0; i < em.rows; ++i) {
    const auto r = em.row(i);
    std::size_t best = 0;
    for (std::size_t t = 1; t < r.size(); ++t)
      if (r[t] > r[best]) best = t;
    out.push_back(static_cast<int>(best));
  }
  return out;
}

std::vector<TaggerExample> tagger_examples(const Dataset& dataset, const BpeVocab& vocab,
                                           const std::vector<std::string>& labels) {
  std::map<std::string, int> label_ids;
  for (std::size_t i = 0; i < labels.size(); ++i) label_ids[labels[i]] = static_cast<int>(i);
  std::vector<TaggerExample> out;
  for (std::size_t s = 0; s < dataset.sentences.size(); ++s) {
    std::vector<std::string> bio;
    try {
      bio = entities_to_bio(dataset.sentences[s]);
    } catch (const ValidationError& e) {
      throw ValidationError("tagger models need BIO-representable (flat) entities; sentence " + std::to_string(s + 1) +
                            ": " + e.what());
    }
    TaggerExample ex = make_tagger_example(tokenize_sentence(vocab, dataset.sentences[s].words));
    for (const std::string& b : bio) {
      const auto it = label_ids.find(b);
      if (it == label_ids.end()) throw ValidationError("tagger: label '" + b + "' is not in the label set");
      ex.labels.push_back(it->second);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

EntitySet tagger_entities(const std::vector<int>& label_ids, const std::vector<std::string>& labels) {
  std::vector<std::string> bio;
  bio.reserve(label_ids.size());
  for (int id : label_ids) bio.push_back(labels.at(static_cast<std::size_t>(id)));
  return bio_to_entities(bio, BioMode::Lenient);
}

}  // namespace ptrner
