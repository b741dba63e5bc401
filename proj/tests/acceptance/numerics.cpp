// Finite differences, step-distribution normalization, and the CRF against
// brute-force enumeration.

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "criteria.hpp"
#include "ptrner/model.hpp"
#include "ptrner/synth.hpp"
#include "ptrner/tagger.hpp"
#include "ptrner/trainer.hpp"

using namespace ptrner;

namespace acceptance {

namespace {

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

int draw(std::mt19937_64& rng, int lo, int hi) { return lo + static_cast<int>(uniform_below(rng, hi - lo + 1)); }

}  // namespace

Outcome gradient_exactness(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.sentences = 4;
  sc.vocab = 20;
  const Dataset data = synth_corpus(sc);
  const BpeVocab vocab = passthrough_vocab(data);
  ModelConfig mc;
  mc.d = 8;
  mc.enc_layers = 1;
  mc.dec_layers = 1;
  mc.heads = 2;
  mc.ffn = 16;
  mc.dropout = 0.0;
  mc.max_positions = 64;
  mc.num_pieces = static_cast<int>(vocab.size());
  mc.num_tags = static_cast<int>(data.tags.size());
  const LinearizedData lin = linearize_dataset(data, vocab, mc, Scheme::Word, data.tags);
  PointerModel model = make_pointer_model(mc, 3);
  const GradCheckResult r = gradient_check(model, lin.examples, 1e-5, 300, 9);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  Outcome o;
  o.pass = r.checked >= 200 && r.max_rel_error < 1e-4 && secs < 60.0;
  o.detail = std::to_string(r.checked) + " coordinates (" + std::to_string(r.nonzero) + " nonzero), max rel " +
             sci(r.max_rel_error) + " at " + r.worst_parameter + " < 1e-4, " + sci(secs) + "s < 60s";
  return o;
}

Outcome distribution_sanity(const Context&) {
  std::mt19937_64 rng(404);
  int steps = 0, bad_sum = 0, non_finite = 0, bad_size = 0;
  double worst = 0.0;
  while (steps < 1000) {
    ModelConfig mc;
    mc.d = 4 * draw(rng, 1, 4);
    mc.heads = mc.d % 8 == 0 ? 4 : 2;
    mc.enc_layers = draw(rng, 0, 2);
    mc.dec_layers = draw(rng, 1, 2);
    mc.ffn = 2 * mc.d;
    mc.num_pieces = draw(rng, 3, 30);
    mc.num_tags = draw(rng, 1, 4);
    mc.max_positions = 48;
    mc.alpha = static_cast<double>(uniform_below(rng, 5)) / 4.0;
    PointerModel model = make_pointer_model(mc, rng());
    // Blow some models up so the logits span hundreds of nats.
    const double scale = std::vector<double>{1.0, 1.0, 4.0, 30.0}[uniform_below(rng, 4)];
    for (Parameter& p : model.params.all())
      for (double& v : p.value.data) v *= scale;

    const int n = draw(rng, 1, 16);
    std::vector<int> tokens;
    for (int i = 0; i < n; ++i) tokens.push_back(mc.piece_token(draw(rng, 0, mc.num_pieces - 1)));
    const EncodedSource src = encode(model, tokens);
    const Matrix keys = pointer_keys(model, src);
    std::vector<int> prefix;
    const int len = draw(rng, 1, 12);
    for (int t = 0; t < len && steps < 1000; ++t, ++steps) {
      const StepDistribution dist = pointer_distribution(keys, decode_step(model, src, prefix));
      if (dist.probs.size() != static_cast<std::size_t>(1 + n + mc.num_tags)) ++bad_size;
      double sum = 0.0;
      for (double p : dist.probs) {
        if (!std::isfinite(p) || p < 0.0) ++non_finite;
        sum += p;
      }
      if (!std::isfinite(sum)) {
        ++non_finite;
        continue;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
      if (std::abs(sum - 1.0) > 1e-9) ++bad_sum;
      prefix.push_back(draw(rng, 1, n + mc.num_tags));
    }
  }
  return {bad_sum == 0 && non_finite == 0 && bad_size == 0,
          std::to_string(steps) + " steps, max |sum - 1| = " + sci(worst) + " <= 1e-9, " +
              std::to_string(non_finite) + " non-finite, " + std::to_string(bad_size) + " wrong sizes"};
}

namespace {

// Independent scoring: log-softmax rows by hand, then start + emissions + transitions.
double brute_score(const Matrix& em, const CrfParams& crf, const std::vector<int>& path) {
  double s = crf.start[static_cast<std::size_t>(path[0])];
  for (std::size_t i = 0; i < em.rows; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j < em.cols; ++j) mx = std::max(mx, em(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < em.cols; ++j) z += std::exp(em(i, j) - mx);
    s += em(i, static_cast<std::size_t>(path[i])) - mx - std::log(z);
    if (i > 0) s += crf.transitions(static_cast<std::size_t>(path[i - 1]), static_cast<std::size_t>(path[i]));
  }
  return s;
}

std::vector<std::vector<int>> all_paths(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> p(static_cast<std::size_t>(n), 0);
  while (true) {
    out.push_back(p);
    int i = n - 1;
    while (i >= 0 && p[static_cast<std::size_t>(i)] == k - 1) p[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) return out;
    ++p[static_cast<std::size_t>(i)];
  }
}

}  // namespace

Outcome crf_oracle(const Context&) {
  std::mt19937_64 rng(808);
  std::normal_distribution<double> normal(0.0, 1.5);
  double worst_ll = 0.0, worst_mass = 0.0;
  int viterbi_miss = 0, paths_total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = draw(rng, 1, 6);
    const int k = draw(rng, 1, 4);
    Matrix em(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
    for (double& v : em.data) v = normal(rng);
    CrfParams crf;
    crf.transitions = Matrix(static_cast<std::size_t>(k), static_cast<std::size_t>(k));
    for (double& v : crf.transitions.data) v = normal(rng);
    crf.start.resize(static_cast<std::size_t>(k));
    for (double& v : crf.start) v = normal(rng);

    const std::vector<std::vector<int>> paths = all_paths(n, k);
    paths_total += static_cast<int>(paths.size());
    std::vector<double> scores;
    double mx = -INFINITY;
    std::size_t best = 0;
    for (std::size_t p = 0; p < paths.size(); ++p) {
      scores.push_back(brute_score(em, crf, paths[p]));
      if (scores[p] > mx) {
        mx = scores[p];
        best = p;
      }
    }
    double z = 0.0;
    for (double s : scores) z += std::exp(s - mx);
    const double log_z = mx + std::log(z);

    const std::size_t gold = uniform_below(rng, paths.size());
    worst_ll = std::max(worst_ll, std::abs(crf_log_likelihood(em, crf, paths[gold]) - (scores[gold] - log_z)));
    if (viterbi(em, crf).path != paths[best]) ++viterbi_miss;
    double mass = 0.0;
    for (const auto& p : paths) mass += std::exp(crf_log_likelihood(em, crf, p));
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
  }
  return {worst_ll <= 1e-6 && viterbi_miss == 0 && worst_mass <= 1e-6,
          "100 instances, " + std::to_string(paths_total) + " paths; max |logP - brute| " + sci(worst_ll) +
              ", Viterbi misses " + std::to_string(viterbi_miss) + ", max |sum P - 1| " + sci(worst_mass)};
}

}  // namespace acceptance
