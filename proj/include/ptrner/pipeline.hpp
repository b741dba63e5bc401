#pragma once
// A trained system (model + vocabulary + tag set), its checkpoint form, and
// dataset-level training / prediction shared by the CLI and the tests.

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ptrner/corpus.hpp"
#include "ptrner/generator.hpp"
#include "ptrner/model.hpp"
#include "ptrner/tagger.hpp"
#include "ptrner/tokenizer.hpp"
#include "ptrner/trainer.hpp"

namespace ptrner {

enum class ModelKind { Pointer, Tagger, TaggerCrf };

std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

struct System {
  ModelKind kind = ModelKind::Pointer;
  BpeVocab vocab;
  std::vector<std::string> tags;
  Scheme scheme = Scheme::Word;
  std::optional<PointerModel> pointer;
  std::optional<TaggerModel> tagger;
  TrainConfig train;
  nlohmann::ordered_json provenance = nlohmann::ordered_json::object();

  // Tagger label set ("O", "B-t", "I-t", ...).
  std::vector<std::string> labels() const { return bio_labels(tags); }
};

void save_system(const std::string& path, const System& system);
System load_system(const std::string& path);

struct SystemSpec {
  ModelKind kind = ModelKind::Pointer;
  ModelConfig model;  // num_pieces / num_tags are filled in from the data
  TrainConfig train;
};

// The tagger shares the pointer model's encoder sizes.
TaggerConfig tagger_config_from(const ModelConfig& model, ModelKind kind, int num_pieces, int num_labels);

struct TrainOutcome {
  System system;
  TrainResult result;
};

// Initializes from spec.train.seed and trains. The tag vocabulary is the
// training set's.
TrainOutcome train_system(const SystemSpec& spec, const BpeVocab& vocab, const Dataset& train_set, const Dataset* dev_set,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});

struct SentencePrediction {
  std::vector<int> indexes;  // raw generated sequence (pointer model only)
  EntitySet entities;
  InvalidCounts invalid;
};

std::vector<SentencePrediction> predict_dataset(const System& system, const Dataset& dataset, const GenConfig& gen);

// {"tokens", "indexes", "entities":[{"spans","type"}], "invalid":{"E1","E2","E3","truncated"}}
std::string prediction_json_line(const RawSentence& input, const SentencePrediction& prediction);

struct PredictionFile {
  Dataset sentences;  // tokens + entities
  std::optional<std::vector<InvalidCounts>> invalid;  // present when every line carries "invalid"
};

// Reads prediction JSONL; plain dataset JSONL is accepted too.
PredictionFile read_predictions(const std::string& path);

}  // namespace ptrner
