// ptrner: command-line front end for vocabulary training, linearization,
// training, prediction, evaluation and analysis.
//
// Exit codes: 0 success, 1 invalid data or files, 2 usage error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ptrner/corpus.hpp"
#include "ptrner/errors.hpp"
#include "ptrner/generator.hpp"
#include "ptrner/kernels.hpp"
#include "ptrner/linearizer.hpp"
#include "ptrner/metrics.hpp"
#include "ptrner/pipeline.hpp"
#include "ptrner/synth.hpp"
#include "ptrner/tokenizer.hpp"
#include "ptrner/trainer.hpp"

namespace {

using nlohmann::ordered_json;
using namespace ptrner;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;

  // data
  std::string data, train, dev, gold, pred;
  std::vector<std::string> inputs;
  std::string vocab;
  bool passthrough = false;
  int merges = 200;
  std::string tags;  // comma-separated explicit tag order
  bool strict_bio = false;

  // model
  std::string model = "pointer";
  std::string scheme = "word";
  int d = 64, enc_layers = 2, dec_layers = 2, heads = 4, ffn = 128, max_positions = 256;
  double alpha = 0.5, dropout = 0.1;
  std::string position_init = "sinusoidal";

  // training
  int epochs = 200, batch_size = 16;
  double lr = 1e-3, warmup = 0.01, clip_norm = 1.0, beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t seed = 1;
  std::string log;
  bool quiet = false;

  // generation
  std::string checkpoint;
  int beam = 1, max_length = 0;

  // analysis
  std::string kind = "position";
  std::vector<int> beams{1, 2, 4, 6};

  // synth
  int sentences = 200, vocab_size = 50;
  std::string family = "mixed", split = "train";

  std::string output;
};

// ---------------------------------------------------------------------------
// helpers

std::optional<std::vector<std::string>> parse_tag_list(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw UsageError("--tags: empty tag name");
    out.push_back(item);
  }
  return out;
}

Dataset read_data(const Options& o, const std::string& path, const std::optional<std::vector<std::string>>& tags = std::nullopt) {
  return read_dataset_file(path, o.strict_bio ? BioMode::Strict : BioMode::Lenient, tags);
}

void need(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

// Streams without a place for metadata (JSONL, CSV) get a sidecar.
void write_sidecar(const std::string& path, const ordered_json& config) {
  if (path.empty() || path == "-") return;
  write_output(path + ".config.json", config.dump(2) + "\n");
}

ordered_json scalar_value(const std::string& s) {
  if (s.empty()) return s;
  try {
    ordered_json j = ordered_json::parse(s);
    if (j.is_number() || j.is_boolean()) return j;
  } catch (const nlohmann::json::exception&) {
  }
  return s;
}

// Every flag of the subcommand with its final value (given, from the config
// file, or default).
ordered_json effective_config(const CLI::App* sub) {
  ordered_json cfg;
  cfg["command"] = sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string& name = opt->get_single_name();
    if (name.empty() || name == "help" || opt->get_lnames().empty()) continue;
    std::string key = opt->get_lnames().front();
    for (char& c : key)
      if (c == '-') c = '_';
    if (opt->count() > 0) {
      const std::vector<std::string>& res = opt->results();
      if (opt->get_expected_max() > 1) {
        ordered_json arr = ordered_json::array();
        for (const std::string& r : res) arr.push_back(scalar_value(r));
        cfg[key] = arr;
      } else {
        cfg[key] = opt->get_type_size_max() == 0 ? ordered_json(true) : scalar_value(res.back());
      }
    } else {
      cfg[key] = opt->get_type_size_max() == 0 ? ordered_json(false) : scalar_value(opt->get_default_str());
    }
  }
  return cfg;
}

// Applies flat JSON keys to flags not given on the command line.
void apply_config_file(CLI::App& app, CLI::App* sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("config " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw Error("config " + path + ": expected a JSON object with flat keys");
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = key;
    for (char& c : flag)
      if (c == '_') c = '-';
    CLI::Option* opt = sub->get_option_no_throw("--" + flag);
    if (opt == nullptr) {
      bool known = false;
      for (const CLI::App* other : app.get_subcommands({}))
        known = known || other->get_option_no_throw("--" + flag) != nullptr;
      if (!known) throw UsageError("config " + path + ": unknown key '" + key + "'");
      continue;
    }
    if (opt->count() > 0) continue;
    std::vector<std::string> items;
    auto as_text = [&](const nlohmann::json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
      if (v.is_number()) return v.dump();
      throw UsageError("config " + path + ": key '" + key + "' must hold a scalar or a list of scalars");
    };
    if (value.is_array()) {
      for (const auto& v : value) items.push_back(as_text(v));
    } else {
      items.push_back(as_text(value));
    }
    if (opt->get_type_size_max() == 0) {
      if (items.size() != 1 || (items[0] != "true" && items[0] != "false")) {
        throw UsageError("config " + path + ": key '" + key + "' must be a boolean");
      }
      if (items[0] == "false") continue;
    }
    for (const std::string& item : items) opt->add_result(item);
    opt->run_callback();
  }
}

BpeVocab vocab_for(const Options& o, const Dataset& data) {
  if (!o.vocab.empty()) return load_vocab(o.vocab);
  return passthrough_vocab(data);
}

ModelConfig model_config(const Options& o) {
  ModelConfig c;
  c.d = o.d;
  c.enc_layers = o.enc_layers;
  c.dec_layers = o.dec_layers;
  c.heads = o.heads;
  c.ffn = o.ffn;
  c.alpha = o.alpha;
  c.dropout = o.dropout;
  c.max_positions = o.max_positions;
  c.position_init = o.position_init;
  return c;
}

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.lr = o.lr;
  c.warmup = o.warmup;
  c.scheme = parse_scheme(o.scheme);
  c.seed = o.seed;
  c.clip_norm = o.clip_norm;
  c.beta1 = o.beta1;
  c.beta2 = o.beta2;
  c.adam_eps = o.adam_eps;
  return c;
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// subcommands

void run_bpe_train(const Options& o, const ordered_json& cfg) {
  if (o.inputs.empty()) throw UsageError("--input is required");
  need(o.output, "--output");
  std::vector<std::string> words;
  Dataset all;
  for (const std::string& path : o.inputs) {
    Dataset ds = read_data(o, path);
    for (RawSentence& s : ds.sentences) {
      words.insert(words.end(), s.words.begin(), s.words.end());
      all.sentences.push_back(std::move(s));
    }
  }
  const BpeVocab vocab = o.passthrough ? passthrough_vocab(all) : train_bpe(words, o.merges);
  ordered_json j = vocab.to_json();
  j["config"] = cfg;
  write_output(o.output, j.dump(2) + "\n");
}

void run_linearize(const Options& o, const ordered_json& cfg) {
  need(o.data, "--data");
  const Dataset ds = read_data(o, o.data, parse_tag_list(o.tags));
  const BpeVocab vocab = vocab_for(o, ds);
  const Scheme scheme = parse_scheme(o.scheme);
  std::string text;
  for (const RawSentence& s : ds.sentences) {
    const TargetSequence seq = linearize(tokenize_sentence(vocab, s.words), s.entities, scheme, ds.tags);
    text += ordered_json{{"indexes", seq.indexes}, {"n", seq.n}}.dump() + "\n";
  }
  write_output(o.output, text);
  write_sidecar(o.output, cfg);
}

void run_train(const Options& o, ordered_json cfg) {
  need(o.train, "--train");
  need(o.output, "--output");
  const Dataset train_set = read_data(o, o.train, parse_tag_list(o.tags));
  std::optional<Dataset> dev_set;
  if (!o.dev.empty()) dev_set = read_data(o, o.dev, train_set.tags);

  BpeVocab vocab;
  if (!o.vocab.empty()) {
    vocab = load_vocab(o.vocab);
  } else if (o.passthrough) {
    vocab = passthrough_vocab(train_set);
  } else {
    std::vector<std::string> words;
    for (const RawSentence& s : train_set.sentences) words.insert(words.end(), s.words.begin(), s.words.end());
    vocab = train_bpe(words, o.merges);
  }

  SystemSpec spec;
  spec.kind = parse_model_kind(o.model);
  spec.model = model_config(o);
  spec.train = train_config(o);
  auto progress = [&](const EpochRecord& r) {
    if (o.quiet) return;
    std::cerr << "epoch " << r.epoch << "/" << o.epochs << " loss " << fixed(r.mean_loss, 6);
    if (r.dev) std::cerr << " dev_f1 " << fixed(r.dev->f1, 4);
    std::cerr << " lr " << r.lr << "\n";
  };
  TrainOutcome out = train_system(spec, vocab, train_set, dev_set ? &*dev_set : nullptr, progress);
  cfg["isa"] = kernels::active().name;
  cfg["best_epoch"] = out.result.best_epoch;
  out.system.provenance = cfg;
  save_system(o.output, out.system);
  if (!o.log.empty()) {
    std::ostringstream csv;
    write_train_log(csv, out.result.log);
    write_output(o.log, csv.str());
    write_sidecar(o.log, cfg);
  }
}

void run_predict(const Options& o, ordered_json cfg) {
  need(o.checkpoint, "--checkpoint");
  need(o.data, "--data");
  const System sys = load_system(o.checkpoint);
  const Dataset ds = read_data(o, o.data);
  GenConfig gen;
  gen.beam = o.beam;
  gen.max_length = o.max_length;
  gen.validate();
  const std::vector<SentencePrediction> preds = predict_dataset(sys, ds, gen);
  std::string text;
  for (std::size_t i = 0; i < preds.size(); ++i) text += prediction_json_line(ds.sentences[i], preds[i]) + "\n";
  write_output(o.output, text);
  cfg["checkpoint_provenance"] = sys.provenance;
  write_sidecar(o.output, cfg);
}

std::vector<TokenizedSentence> tokenize_all(const BpeVocab& vocab, const Dataset& ds) {
  std::vector<TokenizedSentence> out;
  for (const RawSentence& s : ds.sentences) out.push_back(tokenize_sentence(vocab, s.words));
  return out;
}

void check_alignment(const Dataset& pred, const Dataset& gold) {
  if (pred.sentences.size() != gold.sentences.size()) {
    throw ValidationError("prediction has " + std::to_string(pred.sentences.size()) + " sentences, gold has " +
                          std::to_string(gold.sentences.size()));
  }
  for (std::size_t i = 0; i < pred.sentences.size(); ++i) {
    if (!pred.sentences[i].words.empty() && pred.sentences[i].words != gold.sentences[i].words) {
      throw ValidationError("sentence " + std::to_string(i + 1) + ": prediction tokens differ from gold tokens");
    }
  }
}

void run_evaluate(const Options& o, const ordered_json& cfg) {
  need(o.pred, "--pred");
  need(o.gold, "--gold");
  const PredictionFile pred = read_predictions(o.pred);
  const Dataset gold = read_data(o, o.gold);
  check_alignment(pred.sentences, gold);
  std::vector<EntitySet> pred_sets;
  for (const RawSentence& s : pred.sentences.sentences) pred_sets.push_back(s.entities);
  const BpeVocab vocab = vocab_for(o, gold);
  const EvalReport report =
      evaluate_predictions(pred_sets, gold, tokenize_all(vocab, gold), parse_scheme(o.scheme), pred.invalid);
  ordered_json j = to_json(report);
  j["config"] = cfg;
  write_output(o.output, j.dump(2) + "\n");
}

void run_analyze(const Options& o, const ordered_json& cfg) {
  std::ostringstream csv;
  if (o.kind == "position") {
    need(o.pred, "--pred");
    need(o.gold, "--gold");
    const PredictionFile pred = read_predictions(o.pred);
    const Dataset gold = read_data(o, o.gold);
    check_alignment(pred.sentences, gold);
    const BpeVocab vocab = vocab_for(o, gold);
    const Scheme scheme = parse_scheme(o.scheme);
    std::vector<EntitySet> pred_sets, ordered;
    for (std::size_t i = 0; i < gold.sentences.size(); ++i) {
      pred_sets.push_back(pred.sentences.sentences[i].entities);
      ordered.push_back(sort_entities(gold.sentences[i].entities, tokenize_sentence(vocab, gold.sentences[i].words),
                                      scheme, gold.tags));
    }
    csv << position_recall_csv(position_recall(pred_sets, ordered));
  } else {
    need(o.checkpoint, "--checkpoint");
    need(o.data, "--data");
    const System sys = load_system(o.checkpoint);
    const Dataset gold = read_data(o, o.data);
    std::vector<EntitySet> gold_sets;
    for (const RawSentence& s : gold.sentences) gold_sets.push_back(s.entities);
    csv << "beam,precision,recall,f1\n" << std::setprecision(17);
    for (int b : o.beams) {
      GenConfig gen;
      gen.beam = b;
      gen.max_length = o.max_length;
      gen.validate();
      std::vector<EntitySet> pred;
      for (SentencePrediction& p : predict_dataset(sys, gold, gen)) pred.push_back(std::move(p.entities));
      const PRF prf = span_f1(pred, gold_sets);
      csv << b << ',' << prf.precision << ',' << prf.recall << ',' << prf.f1 << '\n';
    }
  }
  write_output(o.output, csv.str());
  write_sidecar(o.output, cfg);
}

void run_stats(const Options& o, const ordered_json& cfg) {
  need(o.data, "--data");
  const Dataset ds = read_data(o, o.data);
  const BpeVocab vocab = vocab_for(o, ds);
  const std::vector<TokenizedSentence> tok = tokenize_all(vocab, ds);
  std::vector<Scheme> schemes{Scheme::Span, Scheme::Bpe, Scheme::Word};
  if (!o.scheme.empty()) schemes = {parse_scheme(o.scheme)};
  ordered_json j;
  j["sentences"] = ds.sentences.size();
  for (Scheme s : schemes) {
    const LengthStats st = length_stats(ds, tok, s);
    j[std::string(scheme_name(s))] = {{"mean", st.mean}, {"median", st.median}, {"entities", st.count}};
  }
  j["config"] = cfg;
  write_output(o.output, j.dump(2) + "\n");
}

void run_synth(const Options& o, const ordered_json& cfg) {
  SynthConfig sc;
  sc.sentences = o.sentences;
  sc.vocab = o.vocab_size;
  sc.family = parse_synth_family(o.family);
  sc.seed = o.seed;
  sc.split = o.split;
  std::ostringstream out;
  write_jsonl(out, synth_corpus(sc));
  write_output(o.output, out.str());
  write_sidecar(o.output, cfg);
}

// ---------------------------------------------------------------------------
// flag registration

void add_vocab_flags(CLI::App* sub, Options& o) {
  sub->add_option("--vocab", o.vocab, "BPE vocabulary JSON (default: one piece per word of the data)");
}

void add_bio_flag(CLI::App* sub, Options& o) {
  sub->add_flag("--strict-bio", o.strict_bio, "Reject I- labels that do not continue an entity (CoNLL input)");
}

void add_scheme_flag(CLI::App* sub, Options& o) {
  sub->add_option("--scheme", o.scheme, "Entity representation: span, bpe or word")
      ->check(CLI::IsMember({"span", "bpe", "word"}));
}

void add_model_flags(CLI::App* sub, Options& o) {
  sub->add_option("--model", o.model, "pointer, tagger (MLP) or tagger-crf")
      ->check(CLI::IsMember({"pointer", "tagger", "tagger-crf"}));
  sub->add_option("--d", o.d, "Model width");
  sub->add_option("--enc-layers", o.enc_layers, "Encoder layers");
  sub->add_option("--dec-layers", o.dec_layers, "Decoder layers");
  sub->add_option("--heads", o.heads, "Attention heads");
  sub->add_option("--ffn", o.ffn, "Feed-forward width");
  sub->add_option("--alpha", o.alpha, "Weight of the pointer MLP output against raw embeddings");
  sub->add_option("--dropout", o.dropout, "Dropout on encoder/decoder inputs and sublayer outputs");
  sub->add_option("--max-positions", o.max_positions, "Longest source or target sequence");
  sub->add_option("--position-init", o.position_init, "Starting values of the learned position tables")
      ->check(CLI::IsMember({"sinusoidal", "normal"}));
}

void add_train_flags(CLI::App* sub, Options& o) {
  sub->add_option("--epochs", o.epochs, "Training epochs");
  sub->add_option("--batch-size", o.batch_size, "Sentences per update");
  sub->add_option("--lr", o.lr, "Peak learning rate");
  sub->add_option("--warmup", o.warmup, "Fraction of updates spent warming up, in (0, 1)");
  sub->add_option("--seed", o.seed, "Master seed (initialization, shuffling, dropout)");
  sub->add_option("--clip-norm", o.clip_norm, "Global gradient-norm clip (<= 0 disables)");
  sub->add_option("--beta1", o.beta1, "Adam first-moment decay");
  sub->add_option("--beta2", o.beta2, "Adam second-moment decay");
  sub->add_option("--adam-eps", o.adam_eps, "Adam denominator epsilon");
}

int dispatch(CLI::App& app, Options& o, std::map<std::string, CLI::App*>& subs) {
  CLI::App* chosen = nullptr;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) chosen = sub;
  if (chosen == nullptr) throw UsageError("a subcommand is required");
  if (!o.config.empty()) apply_config_file(app, chosen, o.config);
  const ordered_json cfg = effective_config(chosen);
  const std::string& name = chosen->get_name();
  if (name == "bpe-train") run_bpe_train(o, cfg);
  else if (name == "linearize") run_linearize(o, cfg);
  else if (name == "train") run_train(o, cfg);
  else if (name == "predict") run_predict(o, cfg);
  else if (name == "evaluate") run_evaluate(o, cfg);
  else if (name == "analyze") run_analyze(o, cfg);
  else if (name == "stats") run_stats(o, cfg);
  else if (name == "synth") run_synth(o, cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Pointer-network named-entity recognition toolkit"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.add_option("--config", o.config, "JSON file of flat flag values; command-line flags win")
      ->envname("PTRNER_CONFIG");

  std::map<std::string, CLI::App*> subs;

  auto* bpe = subs["bpe-train"] = app.add_subcommand("bpe-train", "Learn a BPE vocabulary from datasets");
  bpe->add_option("--input", o.inputs, "Dataset file(s) (JSONL or CoNLL)");
  bpe->add_option("--merges", o.merges, "Number of merges");
  bpe->add_flag("--passthrough", o.passthrough, "One piece per word instead of BPE");
  bpe->add_option("--output", o.output, "Vocabulary JSON to write");
  add_bio_flag(bpe, o);

  auto* lin = subs["linearize"] = app.add_subcommand("linearize", "Dump target index sequences as JSONL");
  lin->add_option("--data", o.data, "Dataset file");
  add_vocab_flags(lin, o);
  add_scheme_flag(lin, o);
  lin->add_option("--tags", o.tags, "Comma-separated tag order (default: sorted)");
  lin->add_option("--output", o.output, "Output JSONL (default stdout)");
  add_bio_flag(lin, o);

  auto* tr = subs["train"] = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--train", o.train, "Training dataset");
  tr->add_option("--dev", o.dev, "Development dataset (best-F1 epoch is kept)");
  add_vocab_flags(tr, o);
  tr->add_flag("--passthrough", o.passthrough, "One piece per word instead of training BPE");
  tr->add_option("--merges", o.merges, "BPE merges learned from the training words when no --vocab is given");
  tr->add_option("--tags", o.tags, "Comma-separated tag order (default: sorted)");
  add_scheme_flag(tr, o);
  add_model_flags(tr, o);
  add_train_flags(tr, o);
  tr->add_option("--output", o.output, "Checkpoint to write");
  tr->add_option("--log", o.log, "Per-epoch CSV log");
  tr->add_flag("--quiet", o.quiet, "No progress on stderr");
  add_bio_flag(tr, o);

  auto* pr = subs["predict"] = app.add_subcommand("predict", "Predict entities with a checkpoint");
  pr->add_option("--checkpoint", o.checkpoint, "Checkpoint from train");
  pr->add_option("--data", o.data, "Dataset to annotate");
  pr->add_option("--beam", o.beam, "Beam size (1 = greedy)")->check(CLI::PositiveNumber);
  pr->add_option("--max-length", o.max_length, "Longest target sequence (0 = 2n + 10)")->check(CLI::NonNegativeNumber);
  pr->add_option("--output", o.output, "Prediction JSONL (default stdout)");
  add_bio_flag(pr, o);

  auto* ev = subs["evaluate"] = app.add_subcommand("evaluate", "Score predictions against gold as a JSON report");
  ev->add_option("--pred", o.pred, "Prediction JSONL (or any dataset JSONL)");
  ev->add_option("--gold", o.gold, "Gold dataset");
  add_vocab_flags(ev, o);
  add_scheme_flag(ev, o);
  ev->add_option("--output", o.output, "Report JSON (default stdout)");
  add_bio_flag(ev, o);

  auto* an = subs["analyze"] = app.add_subcommand("analyze", "Position-recall or beam-size curves as CSV");
  an->add_option("--kind", o.kind, "position (recall by entity ordinal) or beam (F1 per beam size)")
      ->check(CLI::IsMember({"position", "beam"}));
  an->add_option("--pred", o.pred, "Prediction JSONL (position)");
  an->add_option("--gold", o.gold, "Gold dataset (position)");
  an->add_option("--checkpoint", o.checkpoint, "Checkpoint (beam)");
  an->add_option("--data", o.data, "Gold dataset (beam)");
  an->add_option("--beams", o.beams, "Beam sizes (beam)")->check(CLI::PositiveNumber);
  an->add_option("--max-length", o.max_length, "Longest target sequence (0 = 2n + 10)")->check(CLI::NonNegativeNumber);
  add_vocab_flags(an, o);
  add_scheme_flag(an, o);
  an->add_option("--output", o.output, "CSV (default stdout)");
  add_bio_flag(an, o);

  auto* st = subs["stats"] = app.add_subcommand("stats", "Entity representation lengths per scheme");
  st->add_option("--data", o.data, "Dataset file");
  add_vocab_flags(st, o);
  st->add_option("--scheme", o.scheme, "Restrict to one scheme (default: all three)")
      ->check(CLI::IsMember({"span", "bpe", "word"}))
      ->default_str("");
  st->add_option("--output", o.output, "Stats JSON (default stdout)");
  add_bio_flag(st, o);

  auto* sy = subs["synth"] = app.add_subcommand("synth", "Write a seeded synthetic JSONL corpus");
  sy->add_option("--sentences", o.sentences, "Number of sentences");
  sy->add_option("--vocab-size", o.vocab_size, "Distinct words (>= 17)");
  sy->add_option("--family", o.family, "flat, nested, discontinuous or mixed")
      ->check(CLI::IsMember({"flat", "nested", "discontinuous", "mixed"}));
  sy->add_option("--seed", o.seed, "Seed");
  sy->add_option("--split", o.split, "Split name; splits of one seed share their lexicon");
  sy->add_option("--output", o.output, "Output JSONL (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* context = &app;
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) context = sub;
    std::cerr << context->help();
    return 2;
  }

  // Stats defaults to every scheme; the shared default "word" applies elsewhere.
  if (st->parsed() && st->get_option("--scheme")->count() == 0) o.scheme.clear();

  try {
    return dispatch(app, o, subs);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ptrner::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
