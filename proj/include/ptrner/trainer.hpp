#pragma once
// Teacher-forced training with a slanted-triangular schedule and Adam.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptrner/corpus.hpp"
#include "ptrner/generator.hpp"
#include "ptrner/linearizer.hpp"
#include "ptrner/metrics.hpp"
#include "ptrner/model.hpp"
#include "ptrner/tokenizer.hpp"

namespace ptrner {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lr = 1e-3;
  double warmup = 0.01;  // fraction of all steps spent rising to lr
  Scheme scheme = Scheme::Word;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Rises linearly from 0 to cfg.lr at warmup * total_steps, then falls linearly
// to 0 at total_steps. Throws ValidationError when total_steps is 0 or step
// lies outside [0, total_steps].
double lr_at(long step, long total_steps, const TrainConfig& cfg);

class Adam {
 public:
  Adam(const ParameterSet& params, double beta1, double beta2, double eps);
  // One update from the gradients currently held in `params`.
  void step(ParameterSet& params, double lr);
  long steps() const { return t_; }

 private:
  std::vector<Matrix> m_, v_;
  double beta1_, beta2_, eps_;
  long t_ = 0;
};

// A dataset prepared for one vocabulary and scheme.
struct LinearizedData {
  std::vector<TokenizedSentence> sentences;
  std::vector<EntitySet> gold;
  std::vector<PointerExample> examples;
};

LinearizedData linearize_dataset(const Dataset& dataset, const BpeVocab& vocab, const ModelConfig& config,
                                 Scheme scheme, const std::vector<std::string>& tags);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  std::optional<PRF> dev;
  double lr = 0.0;  // rate used by the epoch's last update
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;  // 0 when there was no dev set
  double best_dev_f1 = 0.0;
};

// Loss of example `index` scaled by `weight`; accumulates weight * gradient.
using ExampleLossFn = std::function<double(std::size_t index, double weight, nn::RunMode& mode)>;
using DevScoreFn = std::function<PRF()>;

// The shared optimization loop: seeded shuffling, mini-batches, global-norm
// clipping, Adam under lr_at. `dev` may be empty.
TrainResult optimize(ParameterSet& params, std::size_t example_count, double dropout, const TrainConfig& cfg,
                     const ExampleLossFn& loss, const DevScoreFn& dev,
                     const std::function<void(const EpochRecord&)>& on_epoch = {});

// Entities predicted for every sentence of `data`.
std::vector<EntitySet> predict_entities(const PointerModel& model, const LinearizedData& data,
                                        const std::vector<std::string>& tags, Scheme scheme, const GenConfig& gen);

// Trains in place. With a dev set, the parameters of the best dev-F1 epoch
// (earliest on ties) are restored at the end. Throws Error on a non-finite loss.
TrainResult train(PointerModel& model, const LinearizedData& train_data, const LinearizedData* dev,
                  const std::vector<std::string>& tags, const TrainConfig& cfg,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_train_log(std::ostream& out, const std::vector<EpochRecord>& log);

}  // namespace ptrner
