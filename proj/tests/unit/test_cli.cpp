#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::path(PTRNER_TEST_WORKDIR) / "cli";

int run(const std::string& args) {
  const std::string cmd = "cd '" + kWork.string() + "' && '" + PTRNER_BINARY + "' " + args + " >out.txt 2>err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& name) {
  std::ifstream in(kWork / name, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const std::string& name, const std::string& text) { std::ofstream(kWork / name) << text; }

struct Fresh {
  Fresh() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fresh, "synth is deterministic and splits share a lexicon") {
  REQUIRE(run("synth --sentences 20 --seed 4 --output a.jsonl") == 0);
  REQUIRE(run("synth --sentences 20 --seed 4 --output b.jsonl") == 0);
  CHECK(slurp("a.jsonl") == slurp("b.jsonl"));
  REQUIRE(run("synth --sentences 20 --seed 4 --split dev --output c.jsonl") == 0);
  CHECK(slurp("a.jsonl") != slurp("c.jsonl"));
  CHECK(run("synth --sentences 0") == 1);
  CHECK(run("synth --family sideways") == 2);
}

TEST_CASE_FIXTURE(Fresh, "exit codes") {
  CHECK(run("") == 2);
  CHECK(run("train --no-such-flag") == 2);
  CHECK(run("frobnicate") == 2);
  write("bad.jsonl", R"({"tokens":["a","b"],"entities":[{"spans":[[1,0]],"type":"X"}]})" "\n");
  CHECK(run("linearize --data bad.jsonl") == 1);
  CHECK(slurp("err.txt").find("start > end") != std::string::npos);
  CHECK(run("linearize --data missing.jsonl") == 1);
  write("nested.jsonl", R"({"tokens":["a","b"],"entities":[{"spans":[[0,1]],"type":"X"},{"spans":[[1,1]],"type":"X"}]})" "\n");
  CHECK(run("train --train nested.jsonl --model tagger --epochs 1 --output t.ckpt --quiet") == 1);
  CHECK(slurp("err.txt").find("BIO") != std::string::npos);
}

TEST_CASE_FIXTURE(Fresh, "linearize dumps index sequences") {
  write("one.jsonl", R"({"tokens":["w1","w2","w3","w4"],"entities":[{"spans":[[0,2]],"type":"PER"}]})" "\n");
  REQUIRE(run("linearize --data one.jsonl --scheme span --tags PER,LOC,FAC") == 0);
  const auto j = nlohmann::json::parse(slurp("out.txt").substr(0, slurp("out.txt").find('\n')));
  CHECK(j["indexes"] == nlohmann::json::parse("[1,3,5]"));
  CHECK(j["n"] == 4);
}

TEST_CASE_FIXTURE(Fresh, "train, predict, evaluate, analyze and stats compose") {
  REQUIRE(run("synth --sentences 12 --vocab-size 20 --output train.jsonl") == 0);
  REQUIRE(run("synth --sentences 6 --vocab-size 20 --split dev --output dev.jsonl") == 0);
  REQUIRE(run("bpe-train --input train.jsonl dev.jsonl --merges 10 --output vocab.json") == 0);
  REQUIRE(run("train --train train.jsonl --dev dev.jsonl --vocab vocab.json --d 16 --heads 2 --ffn 16 --epochs 2 "
              "--output m.ckpt --log log.csv --quiet") == 0);
  CHECK(slurp("log.csv").rfind("epoch,mean_loss,dev_P,dev_R,dev_F1,lr\n", 0) == 0);
  CHECK(fs::exists(kWork / "log.csv.config.json"));
  REQUIRE(run("predict --checkpoint m.ckpt --data dev.jsonl --beam 2 --output pred.jsonl") == 0);
  const std::string pred = slurp("pred.jsonl");
  const auto first = nlohmann::json::parse(pred.substr(0, pred.find('\n')));
  for (const char* k : {"tokens", "indexes", "entities", "invalid"}) CHECK(first.contains(k));
  REQUIRE(run("evaluate --pred pred.jsonl --gold dev.jsonl --vocab vocab.json --output report.json") == 0);
  const auto report = nlohmann::json::parse(slurp("report.json"));
  CHECK(report.contains("micro"));
  CHECK(report.contains("invalid"));
  CHECK(report.contains("config"));
  REQUIRE(run("analyze --kind position --pred pred.jsonl --gold dev.jsonl --vocab vocab.json --output pos.csv") == 0);
  CHECK(slurp("pos.csv").rfind("bucket,count,recall\n", 0) == 0);
  REQUIRE(run("analyze --kind beam --checkpoint m.ckpt --data dev.jsonl --beams 1 2 --output beam.csv") == 0);
  CHECK(slurp("beam.csv").rfind("beam,precision,recall,f1\n1,", 0) == 0);
  REQUIRE(run("stats --data train.jsonl --vocab vocab.json") == 0);
  const auto stats = nlohmann::json::parse(slurp("out.txt"));
  CHECK(stats.dump().find("span") != std::string::npos);
  CHECK(run("predict --checkpoint nope.ckpt --data dev.jsonl") == 1);
}

TEST_CASE_FIXTURE(Fresh, "tagger baselines train and predict through the same commands") {
  REQUIRE(run("synth --sentences 10 --vocab-size 20 --family flat --output flat.jsonl") == 0);
  for (const char* kind : {"tagger", "tagger-crf"}) {
    REQUIRE(run(std::string("train --train flat.jsonl --model ") + kind +
                " --passthrough --d 16 --heads 2 --ffn 16 --epochs 1 --output t.ckpt --quiet") == 0);
    REQUIRE(run("predict --checkpoint t.ckpt --data flat.jsonl --output p.jsonl") == 0);
    REQUIRE(run("evaluate --pred p.jsonl --gold flat.jsonl") == 0);
  }
}

TEST_CASE_FIXTURE(Fresh, "config files fill unset flags; unknown keys are usage errors") {
  REQUIRE(run("synth --sentences 5 --output x.jsonl") == 0);
  write("cfg.json", R"({"sentences": 3, "seed": 9})");
  REQUIRE(run("--config cfg.json synth --output y.jsonl") == 0);
  const std::string y = slurp("y.jsonl");
  CHECK(std::count(y.begin(), y.end(), '\n') == 3);
  REQUIRE(run("--config cfg.json synth --sentences 2 --output z.jsonl") == 0);
  const std::string z = slurp("z.jsonl");
  CHECK(std::count(z.begin(), z.end(), '\n') == 2);
  const auto side = nlohmann::json::parse(slurp("z.jsonl.config.json"));
  CHECK(side.dump().find("\"seed\":9") != std::string::npos);
  write("bad.json", R"({"sentencez": 3})");
  CHECK(run("--config bad.json synth") == 2);
}
