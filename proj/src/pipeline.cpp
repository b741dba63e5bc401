#include "ptrner/pipeline.hpp"

#include <fstream>
#include <sstream>

#include "ptrner/checkpoint.hpp"
#include "ptrner/errors.hpp"

namespace ptrner {

using nlohmann::ordered_json;

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Pointer: return "pointer";
    case ModelKind::Tagger: return "tagger";
    case ModelKind::TaggerCrf: return "tagger-crf";
  }
  return "pointer";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "pointer") return ModelKind::Pointer;
  if (name == "tagger") return ModelKind::Tagger;
  if (name == "tagger-crf") return ModelKind::TaggerCrf;
  throw ValidationError("unknown model kind '" + std::string(name) + "' (pointer, tagger, tagger-crf)");
}

void save_system(const std::string& path, const System& system) {
  ordered_json meta;
  meta["model_kind"] = model_kind_name(system.kind);
  if (system.kind == ModelKind::Pointer) {
    meta["model_config"] = system.pointer->config.to_json();
  } else {
    meta["model_config"] = system.tagger->config.to_json();
  }
  meta["scheme"] = scheme_name(system.scheme);
  meta["tags"] = system.tags;
  meta["vocab"] = system.vocab.to_json();
  meta["train_config"] = system.train.to_json();
  meta["optimizer"] = {{"name", "adam"},
                       {"beta1", system.train.beta1},
                       {"beta2", system.train.beta2},
                       {"eps", system.train.adam_eps},
                       {"clip_norm", system.train.clip_norm},
                       {"schedule", "slanted-triangular"}};
  meta["provenance"] = system.provenance;
  const ParameterSet& params = system.kind == ModelKind::Pointer ? system.pointer->params : system.tagger->params;
  write_checkpoint(path, meta, params);
}

System load_system(const std::string& path) {
  const LoadedCheckpoint ckpt = read_checkpoint(path);
  const ordered_json& meta = ckpt.meta;
  System sys;
  try {
    sys.kind = parse_model_kind(meta.at("model_kind").get<std::string>());
    sys.scheme = parse_scheme(meta.at("scheme").get<std::string>());
    sys.tags = meta.at("tags").get<std::vector<std::string>>();
    sys.vocab = BpeVocab::from_json(meta.at("vocab"));
    sys.train = TrainConfig::from_json(meta.at("train_config"));
    if (meta.contains("provenance")) sys.provenance = meta.at("provenance");
    if (sys.kind == ModelKind::Pointer) {
      sys.pointer = build_pointer_model(ModelConfig::from_json(meta.at("model_config")));
      load_parameters(sys.pointer->params, ckpt);
    } else {
      sys.tagger = build_tagger(TaggerConfig::from_json(meta.at("model_config")));
      load_parameters(sys.tagger->params, ckpt);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": malformed checkpoint header: " + e.what());
  }
  return sys;
}

TaggerConfig tagger_config_from(const ModelConfig& model, ModelKind kind, int num_pieces, int num_labels) {
  TaggerConfig t;
  t.kind = kind == ModelKind::TaggerCrf ? TaggerKind::Crf : TaggerKind::Mlp;
  t.d = model.d;
  t.layers = model.enc_layers;
  t.heads = model.heads;
  t.ffn = model.ffn;
  t.hidden = model.d;
  t.dropout = model.dropout;
  t.max_positions = model.max_positions;
  t.position_init = model.position_init;
  t.num_pieces = num_pieces;
  t.num_labels = num_labels;
  return t;
}

TrainOutcome train_system(const SystemSpec& spec, const BpeVocab& vocab, const Dataset& train_set, const Dataset* dev_set,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
  TrainOutcome out;
  System& sys = out.system;
  sys.kind = spec.kind;
  sys.vocab = vocab;
  sys.tags = train_set.tags;
  sys.scheme = spec.train.scheme;
  sys.train = spec.train;
  const int pieces = static_cast<int>(vocab.size());

  if (spec.kind == ModelKind::Pointer) {
    ModelConfig cfg = spec.model;
    cfg.num_pieces = pieces;
    cfg.num_tags = static_cast<int>(sys.tags.size());
    sys.pointer = make_pointer_model(cfg, spec.train.seed);
    const LinearizedData train_data = linearize_dataset(train_set, vocab, cfg, spec.train.scheme, sys.tags);
    std::optional<LinearizedData> dev_data;
    if (dev_set != nullptr) dev_data = linearize_dataset(*dev_set, vocab, cfg, spec.train.scheme, sys.tags);
    out.result = train(*sys.pointer, train_data, dev_data ? &*dev_data : nullptr, sys.tags, spec.train, on_epoch);
    return out;
  }

  const std::vector<std::string> labels = sys.labels();
  sys.tagger = make_tagger(tagger_config_from(spec.model, spec.kind, pieces, static_cast<int>(labels.size())),
                           spec.train.seed);
  const std::vector<TaggerExample> examples = tagger_examples(train_set, vocab, labels);
  TaggerModel& model = *sys.tagger;
  const ExampleLossFn loss = [&](std::size_t i, double weight, nn::RunMode& mode) {
    return tagger_loss_backward(model, examples[i], weight, mode);
  };
  DevScoreFn dev_score;
  std::vector<TaggerExample> dev_examples;
  std::vector<EntitySet> dev_gold;
  if (dev_set != nullptr) {
    dev_examples = tagger_examples(*dev_set, vocab, labels);
    for (const RawSentence& s : dev_set->sentences) dev_gold.push_back(s.entities);
    dev_score = [&] {
      std::vector<EntitySet> pred;
      for (const TaggerExample& ex : dev_examples) pred.push_back(tagger_entities(tagger_decode(model, ex), labels));
      return span_f1(pred, dev_gold);
    };
  }
  out.result = optimize(model.params, examples.size(), model.config.dropout, spec.train, loss, dev_score, on_epoch);
  return out;
}

std::vector<SentencePrediction> predict_dataset(const System& system, const Dataset& dataset, const GenConfig& gen) {
  std::vector<SentencePrediction> out;
  out.reserve(dataset.sentences.size());
  const std::vector<std::string> labels = system.labels();
  for (const RawSentence& s : dataset.sentences) {
    const TokenizedSentence tok = tokenize_sentence(system.vocab, s.words);
    SentencePrediction p;
    if (system.kind == ModelKind::Pointer) {
      Prediction pr = predict_sentence(*system.pointer, tok, system.tags, system.scheme, gen);
      p.indexes = std::move(pr.generation.sequence.indexes);
      p.entities = std::move(pr.post.entities);
      p.invalid = pr.post.invalid;
    } else {
      p.entities = tagger_entities(tagger_decode(*system.tagger, make_tagger_example(tok)), labels);
      p.invalid.raw = static_cast<int>(p.entities.size());
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string prediction_json_line(const RawSentence& input, const SentencePrediction& prediction) {
  ordered_json obj;
  obj["tokens"] = input.words;
  obj["indexes"] = prediction.indexes;
  ordered_json ents = ordered_json::array();
  for (const Entity& e : prediction.entities) {
    ordered_json spans = ordered_json::array();
    for (const Fragment& f : e.fragments) spans.push_back({f.start, f.end});
    ents.push_back(ordered_json{{"spans", spans}, {"type", e.tag}});
  }
  obj["entities"] = ents;
  obj["invalid"] = {{"E1", prediction.invalid.e1},
                    {"E2", prediction.invalid.e2},
                    {"E3", prediction.invalid.e3},
                    {"truncated", prediction.invalid.truncated},
                    {"raw", prediction.invalid.raw}};
  return obj.dump();
}

PredictionFile read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();

  PredictionFile out;
  std::istringstream first(text);
  out.sentences = read_jsonl(first);

  std::vector<InvalidCounts> invalid;
  bool complete = true;
  std::istringstream second(text);
  std::string line;
  while (std::getline(second, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const nlohmann::json obj = nlohmann::json::parse(line);
    if (!obj.contains("invalid")) {
      complete = false;
      continue;
    }
    const nlohmann::json& inv = obj.at("invalid");
    InvalidCounts c;
    c.e1 = inv.value("E1", 0);
    c.e2 = inv.value("E2", 0);
    c.e3 = inv.value("E3", 0);
    c.truncated = inv.value("truncated", 0);
    c.raw = inv.value("raw", static_cast<int>(obj.at("entities").size()) + c.e1 + c.e2 + c.e3);
    invalid.push_back(c);
  }
  if (complete) out.invalid = std::move(invalid);
  return out;
}

}  // namespace ptrner
