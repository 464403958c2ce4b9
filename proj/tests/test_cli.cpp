#include <doctest.h>

#include <json.hpp>
#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lasr/data.hpp"
#include "lasr/model.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int64_t kDay = 86400;
constexpr int64_t kBase = 1230768000;  // 2009-01-01T00:00:00Z

fs::path scratch_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "lasr_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path out = scratch_dir() / ("stdout." + std::to_string(counter));
  const fs::path err = scratch_dir() / ("stderr." + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string(LASR_BIN) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

// Three listeners with overlapping tastes playing fixed daily rotations for
// twelve days; enough signal for a tiny model to learn something.
std::string write_events_file() {
  const fs::path path = scratch_dir() / "events.tsv";
  std::ofstream out(path);
  const std::vector<std::pair<std::string, std::vector<std::string>>> users = {
      {"alice", {"artA", "artB", "artC", "artD"}},
      {"bob", {"artC", "artD", "artE", "artF"}},
      {"carol", {"artE", "artF", "artG", "artH"}},
  };
  for (int day = 0; day < 12; ++day) {
    for (const auto& [user, items] : users) {
      for (size_t i = 0; i < items.size(); ++i) {
        const int64_t ts = kBase + day * kDay + static_cast<int64_t>(i + 1) * 3600;
        out << user << '\t' << ts << '\t' << items[i] << '\n';
      }
    }
  }
  return path.string();
}

struct Workspace {
  bool ok = false;
  std::string why;
  std::string events;
  std::string data_dir;
  std::string model;
};

const Workspace& workspace() {
  static const Workspace w = [] {
    Workspace ws;
    ws.events = write_events_file();
    ws.data_dir = (scratch_dir() / "data").string();
    const RunResult ingest =
        run_cli("ingest --events " + ws.events + " --out " + ws.data_dir + " --seed 3");
    if (ingest.exit_code != 0) {
      ws.why = "ingest failed: " + ingest.err;
      return ws;
    }
    ws.model = (scratch_dir() / "model.lasr").string();
    const RunResult train = run_cli(
        "train --data " + ws.data_dir + " --model " + ws.model +
        " --stages 1 --dim 4 --k 3 --lr 0.1 --max-updates 1500 --eval-every 500 "
        "--patience 10 --seed 7");
    if (train.exit_code != 0) {
      ws.why = "train failed: " + train.err;
      return ws;
    }
    ws.ok = true;
    return ws;
  }();
  return w;
}

}  // namespace

TEST_CASE("cli: ingest splits an event log into reproducible artifacts") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  for (const char* name : {"train_pairs.tsv", "valid_pairs.tsv", "test_pairs.tsv",
                           "query_vocab.tsv", "item_vocab.tsv"}) {
    CHECK(fs::exists(fs::path(ws.data_dir) / name));
  }

  const RunResult rerun =
      run_cli("ingest --events " + ws.events + " --out " + (scratch_dir() / "data2").string() +
              " --seed 3");
  REQUIRE(rerun.exit_code == 0);
  CHECK(rerun.out.find("train_pairs=") != std::string::npos);
  CHECK(rerun.out.find("test_pairs=") != std::string::npos);
  for (const char* name : {"train_pairs.tsv", "valid_pairs.tsv", "test_pairs.tsv",
                           "query_vocab.tsv", "item_vocab.tsv"}) {
    CHECK(read_file(fs::path(ws.data_dir) / name) ==
          read_file(scratch_dir() / "data2" / name));
  }
}

TEST_CASE("cli: ingest of an empty log fails without partial outputs") {
  const fs::path empty = scratch_dir() / "empty.tsv";
  std::ofstream(empty).close();
  const fs::path out_dir = scratch_dir() / "empty_out";
  const RunResult r =
      run_cli("ingest --events " + empty.string() + " --out " + out_dir.string());
  CHECK(r.exit_code == 2);
  CHECK_FALSE(fs::exists(out_dir));
}

TEST_CASE("cli: malformed events fail with the offending line") {
  const fs::path bad = scratch_dir() / "bad.tsv";
  std::ofstream(bad) << "alice\t100\tartA\nbob\tnotatime\n";
  const RunResult r = run_cli("ingest --events " + bad.string() + " --out " +
                              (scratch_dir() / "bad_out").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find(":2:") != std::string::npos);
}

TEST_CASE("cli: missing required flags are a usage error") {
  CHECK(run_cli("ingest --out /tmp/nowhere").exit_code == 1);
  CHECK(run_cli("train --model /tmp/m.lasr").exit_code == 1);
  CHECK(run_cli("nonsense-command").exit_code == 1);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("cli: training writes a model, vocab sidecars, and progress lines") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  CHECK(fs::exists(ws.model));
  CHECK(fs::exists(ws.model + ".query_vocab.tsv"));
  CHECK(fs::exists(ws.model + ".item_vocab.tsv"));

  const fs::path log = scratch_dir() / "train.log";
  const RunResult r = run_cli("train --data " + ws.data_dir + " --model " +
                              (scratch_dir() / "model_logged.lasr").string() +
                              " --stages 0 --dim 4 --k 3 --max-updates 600 "
                              "--eval-every 200 --seed 7 --log " + log.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.err.find("# effective config: train") != std::string::npos);
  const std::string logged = read_file(log);
  CHECK(logged.find("stage=0 updates=200 valid_recall@3=") != std::string::npos);
  CHECK(logged.find("stage=0 updates=600 valid_recall@3=") != std::string::npos);
}

TEST_CASE("cli: the same seed reproduces the model file byte for byte") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const std::string again = (scratch_dir() / "model_again.lasr").string();
  const RunResult r = run_cli(
      "train --data " + ws.data_dir + " --model " + again +
      " --stages 1 --dim 4 --k 3 --lr 0.1 --max-updates 1500 --eval-every 500 "
      "--patience 10 --seed 7");
  REQUIRE(r.exit_code == 0);
  CHECK(read_file(ws.model) == read_file(again));
}

TEST_CASE("cli: the two losses yield different models from the same seed") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const std::string warp_model = (scratch_dir() / "model_warp.lasr").string();
  const std::string auc_model = (scratch_dir() / "model_auc.lasr").string();
  const std::string shared_flags =
      " --stages 0 --dim 4 --k 3 --max-updates 800 --eval-every 400 --seed 11 --loss ";
  REQUIRE(run_cli("train --data " + ws.data_dir + " --model " + warp_model +
                  shared_flags + "warp")
              .exit_code == 0);
  REQUIRE(run_cli("train --data " + ws.data_dir + " --model " + auc_model +
                  shared_flags + "auc")
              .exit_code == 0);
  CHECK(read_file(warp_model) != read_file(auc_model));
}

TEST_CASE("cli: config file values apply under explicit flags") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const fs::path cfg = scratch_dir() / "run.cfg";
  std::ofstream(cfg) << "dim=8\nmax-updates=0\nk=3\nseed=21\n";
  const std::string model_a = (scratch_dir() / "model_cfg_a.lasr").string();
  const RunResult a = run_cli("train --data " + ws.data_dir + " --model " + model_a +
                              " --config " + cfg.string());
  REQUIRE(a.exit_code == 0);
  CHECK(a.err.find(" dim=8") != std::string::npos);

  const std::string model_b = (scratch_dir() / "model_cfg_b.lasr").string();
  const RunResult b = run_cli("train --data " + ws.data_dir + " --model " + model_b +
                              " --config " + cfg.string() + " --dim 4");
  REQUIRE(b.exit_code == 0);
  CHECK(b.err.find(" dim=4") != std::string::npos);  // flag wins over the file
  CHECK(lasr::load_model(model_a).n == 8);
  CHECK(lasr::load_model(model_b).n == 4);
}

TEST_CASE("cli: evaluation emits the metric keys as text and json") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const std::string pairs = ws.data_dir + "/test_pairs.tsv";
  const RunResult text = run_cli("eval --model " + ws.model + " --pairs " + pairs +
                                 " --ks 5,10 --strategy iterative");
  REQUIRE_MESSAGE(text.exit_code == 0, text.err);
  CHECK(text.out.find("recall@5=") != std::string::npos);
  CHECK(text.out.find("recall@10=") != std::string::npos);
  CHECK(text.out.find("map=") != std::string::npos);
  CHECK(text.out.find("mean_rank=") != std::string::npos);
  CHECK(text.out.find("evaluated=") != std::string::npos);
  CHECK(text.out.find("skipped_oov=") != std::string::npos);
  CHECK(text.out.find("precision") == std::string::npos);

  const RunResult json = run_cli("eval --model " + ws.model + " --pairs " + pairs +
                                 " --ks 5,10 --json");
  REQUIRE(json.exit_code == 0);
  const nlohmann::json doc = nlohmann::json::parse(json.out);
  CHECK(doc.contains("recall@5"));
  CHECK(doc.contains("recall@10"));
  CHECK(doc.contains("map"));
  CHECK(doc.contains("mean_rank"));
  CHECK(doc.contains("evaluated"));
  CHECK(doc.contains("skipped_oov"));
  CHECK(doc.size() == 6);

  const RunResult beam = run_cli("eval --model " + ws.model + " --pairs " + pairs +
                                 " --strategy beam --beam-width 8");
  CHECK(beam.exit_code == 0);
}

TEST_CASE("cli: a vocabulary that disagrees with the model names both files") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const fs::path copy = scratch_dir() / "model_badvocab.lasr";
  fs::copy_file(ws.model, copy, fs::copy_options::overwrite_existing);
  fs::copy_file(ws.model + ".query_vocab.tsv", copy.string() + ".query_vocab.tsv",
                fs::copy_options::overwrite_existing);
  std::ofstream(copy.string() + ".item_vocab.tsv") << "only\t0\n";
  const RunResult r = run_cli("eval --model " + copy.string() + " --pairs " +
                              ws.data_dir + "/test_pairs.tsv");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find(copy.string()) != std::string::npos);
  CHECK(r.err.find(copy.string() + ".item_vocab.tsv") != std::string::npos);
}

TEST_CASE("cli: prediction lists rank, token, and score per line") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const RunResult r = run_cli("predict --model " + ws.model + " --query artC --k 5");
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  std::istringstream lines(r.out);
  std::string line;
  int rank = 0;
  const lasr::Vocab items = lasr::Vocab::load(ws.model + ".item_vocab.tsv");
  while (std::getline(lines, line)) {
    ++rank;
    const size_t tab1 = line.find('\t');
    const size_t tab2 = line.find('\t', tab1 + 1);
    REQUIRE(tab1 != std::string::npos);
    REQUIRE(tab2 != std::string::npos);
    CHECK(line.substr(0, tab1) == std::to_string(rank));
    CHECK(items.lookup(line.substr(tab1 + 1, tab2 - tab1 - 1)).has_value());
    CHECK(line.find('.', tab2) != std::string::npos);  // fixed-point score
  }
  CHECK(rank == 5);
}

TEST_CASE("cli: prediction errors") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const RunResult unknown = run_cli("predict --model " + ws.model + " --query artZ");
  CHECK(unknown.exit_code == 2);
  CHECK(unknown.err.find("artZ") != std::string::npos);
  CHECK(run_cli("predict --model " + ws.model + " --query artA --k 10000").exit_code == 1);
  CHECK(run_cli("predict --model " + ws.model).exit_code == 1);
  CHECK(run_cli("predict --model " + ws.model + " --query artA --strategy sideways")
            .exit_code == 1);
}

TEST_CASE("cli: width-1 beam prediction reproduces greedy byte for byte") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);
  const RunResult greedy =
      run_cli("predict --model " + ws.model + " --query artD --k 3 --strategy greedy");
  const RunResult beam = run_cli("predict --model " + ws.model +
                                 " --query artD --k 3 --strategy beam --beam-width 1");
  REQUIRE(greedy.exit_code == 0);
  REQUIRE(beam.exit_code == 0);
  CHECK(greedy.out == beam.out);
  CHECK_FALSE(greedy.out.empty());
}

TEST_CASE("cli: without structure the cascade prediction is the base ranking") {
  const Workspace& ws = workspace();
  REQUIRE_MESSAGE(ws.ok, ws.why);

  // hand-built three-stage model, shared parameters, zeroed structure maps
  const lasr::Vocab queries = lasr::Vocab::load(ws.model + ".query_vocab.tsv");
  const lasr::Vocab items = lasr::Vocab::load(ws.model + ".item_vocab.tsv");
  lasr::Model model;
  model.n = 4;
  model.D_q = queries.size();
  model.D_items = items.size();
  model.k = 3;
  lasr::StageParams stage = lasr::init_stage(4, model.D_q, model.D_items, 77);
  stage.S.set_zero();
  model.stages.assign(3, stage);
  const std::string path = (scratch_dir() / "model_nostructure.lasr").string();
  lasr::save_model(model, path);
  queries.save(path + ".query_vocab.tsv");
  items.save(path + ".item_vocab.tsv");

  const RunResult iterative = run_cli("predict --model " + path +
                                      " --query artB --k 5 --strategy iterative --stage 2");
  const RunResult unstructured =
      run_cli("predict --model " + path + " --query artB --k 5 --strategy unstructured");
  REQUIRE(iterative.exit_code == 0);
  REQUIRE(unstructured.exit_code == 0);
  CHECK(iterative.out == unstructured.out);
  CHECK_FALSE(iterative.out.empty());
}

TEST_CASE("cli: synthetic benchmark prints per-seed lines and a summary") {
  const RunResult r = run_cli(
      "bench-synthetic --seeds 1 --max-updates 2500 --eval-every 1250 --patience 5");
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out.find("seed=1 recall@5_t0=") != std::string::npos);
  CHECK(r.out.find("recall@5_t1=") != std::string::npos);
  CHECK(r.out.find("t1_wins=") != std::string::npos);
  CHECK(r.out.find("mean_improvement=") != std::string::npos);
}
