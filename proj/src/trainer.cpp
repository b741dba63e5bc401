#include "ptrner/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>

#include "ptrner/errors.hpp"
#include "ptrner/rng.hpp"

namespace ptrner {

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("train: batch_size must be >= 1");
  if (!(warmup > 0.0 && warmup < 1.0)) throw ValidationError("train: warmup must lie in (0, 1)");
  if (!(lr >= 0.0)) throw ValidationError("train: lr must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("train: adam_eps must be > 0");
}

nlohmann::ordered_json TrainConfig::to_json() const {
  return {{"epochs", epochs},       {"batch_size", batch_size}, {"lr", lr},
          {"warmup", warmup},       {"scheme", scheme_name(scheme)}, {"seed", seed},
          {"clip_norm", clip_norm}, {"beta1", beta1},           {"beta2", beta2},
          {"adam_eps", adam_eps}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.warmup = j.value("warmup", c.warmup);
  if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
  c.seed = j.value("seed", c.seed);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  return c;
}

double lr_at(long step, long total_steps, const TrainConfig& cfg) {
  if (total_steps <= 0) throw ValidationError("lr_at: total_steps must be > 0");
  if (step < 0 || step > total_steps) throw ValidationError("lr_at: step outside [0, total_steps]");
  const double t = static_cast<double>(step);
  const double total = static_cast<double>(total_steps);
  const double apex = cfg.warmup * total;
  if (t <= apex) return cfg.lr * t / apex;
  return cfg.lr * (total - t) / (total - apex);
}

Adam::Adam(const ParameterSet& params, double beta1, double beta2, double eps)
    : beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Parameter& p : params.all()) {
    m_.emplace_back(p.value.rows, p.value.cols);
    v_.emplace_back(p.value.rows, p.value.cols);
  }
}

void Adam::step(ParameterSet& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    std::vector<double>& m = m_[i].data;
    std::vector<double>& v = v_[i].data;
    for (std::size_t k = 0; k < p.value.data.size(); ++k) {
      const double g = p.grad.data[k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value.data[k] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

LinearizedData linearize_dataset(const Dataset& dataset, const BpeVocab& vocab, const ModelConfig& config,
                                 Scheme scheme, const std::vector<std::string>& tags) {
  LinearizedData out;
  for (const RawSentence& s : dataset.sentences) {
    TokenizedSentence t = tokenize_sentence(vocab, s.words);
    PointerExample ex;
    ex.tokens = source_tokens(config, t);
    ex.target = linearize(t, s.entities, scheme, tags).indexes;
    out.examples.push_back(std::move(ex));
    out.gold.push_back(s.entities);
    out.sentences.push_back(std::move(t));
  }
  return out;
}

std::vector<EntitySet> predict_entities(const PointerModel& model, const LinearizedData& data,
                                        const std::vector<std::string>& tags, Scheme scheme, const GenConfig& gen) {
  std::vector<EntitySet> out;
  out.reserve(data.sentences.size());
  for (const TokenizedSentence& s : data.sentences) out.push_back(predict_sentence(model, s, tags, scheme, gen).post.entities);
  return out;
}

TrainResult optimize(ParameterSet& params, std::size_t count, double dropout, const TrainConfig& cfg,
                     const ExampleLossFn& loss_fn, const DevScoreFn& dev,
                     const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (count == 0) throw ValidationError("train: empty training set");

  const SeedStreams seeds(cfg.seed);
  std::mt19937_64 shuffle_rng = seeds.stream("shuffle");
  std::mt19937_64 dropout_rng = seeds.stream("dropout");
  nn::RunMode mode{true, dropout, &dropout_rng};

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const long total_steps = static_cast<long>((count + batch - 1) / batch) * cfg.epochs;
  Adam adam(params, cfg.beta1, cfg.beta2, cfg.adam_eps);

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::optional<ParameterSet> best;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Explicit Fisher-Yates so the order does not depend on the standard
    // library's shuffle implementation.
    for (std::size_t i = count - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng() % (i + 1));
      std::swap(order[i], order[j]);
    }
    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t begin = 0; begin < count; begin += batch) {
      const std::size_t end = std::min(count, begin + batch);
      const double weight = 1.0 / static_cast<double>(end - begin);
      params.zero_grad();
      for (std::size_t b = begin; b < end; ++b) {
        const double loss = loss_fn(order[b], weight, mode);
        if (!std::isfinite(loss)) {
          throw Error("train: loss diverged (" + std::to_string(loss) + ") at epoch " + std::to_string(epoch) +
                      ", step " + std::to_string(step + 1) + ", example " + std::to_string(order[b]));
        }
        loss_sum += loss;
      }
      if (cfg.clip_norm > 0.0) {
        const double norm = params.grad_norm();
        if (!std::isfinite(norm)) throw Error("train: gradient norm is not finite at step " + std::to_string(step + 1));
        if (norm > cfg.clip_norm) params.scale_grad(cfg.clip_norm / norm);
      }
      ++step;
      lr = lr_at(step, total_steps, cfg);
      adam.step(params, lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(count);
    rec.lr = lr;
    if (dev) {
      rec.dev = dev();
      if (!best || rec.dev->f1 > result.best_dev_f1) {
        result.best_dev_f1 = rec.dev->f1;
        result.best_epoch = epoch;
        best = params;
      }
    }
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  if (best) {
    for (std::size_t i = 0; i < best->size(); ++i) params[i].value = (*best)[i].value;
  }
  params.zero_grad();
  return result;
}

TrainResult train(PointerModel& model, const LinearizedData& train_data, const LinearizedData* dev,
                  const std::vector<std::string>& tags, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  const ExampleLossFn loss = [&](std::size_t i, double weight, nn::RunMode& mode) {
    const PointerExample& ex = train_data.examples[i];
    return sequence_nll_backward(model, ex.tokens, ex.target, weight, mode);
  };
  DevScoreFn dev_score;
  if (dev != nullptr) {
    dev_score = [&] { return span_f1(predict_entities(model, *dev, tags, cfg.scheme, GenConfig{}), dev->gold); };
  }
  return optimize(model.params, train_data.examples.size(), model.config.dropout, cfg, loss, dev_score, on_epoch);
}

void write_train_log(std::ostream& out, const std::vector<EpochRecord>& log) {
  out << "epoch,mean_loss,dev_P,dev_R,dev_F1,lr\n";
  out << std::setprecision(17);
  for (const EpochRecord& r : log) {
    out << r.epoch << ',' << r.mean_loss << ',';
    if (r.dev) {
      out << r.dev->precision << ',' << r.dev->recall << ',' << r.dev->f1;
    } else {
      out << ",,";
    }
    out << ',' << r.lr << '\n';
  }
}

}  // namespace ptrner
