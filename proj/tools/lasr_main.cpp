#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lasr/data.hpp"
#include "lasr/error.hpp"
#include "lasr/evaluate.hpp"
#include "lasr/inference.hpp"
#include "lasr/model.hpp"
#include "lasr/synthetic.hpp"
#include "lasr/trainer.hpp"

namespace fs = std::filesystem;
using namespace lasr;

namespace {

// ---------------------------------------------------------------------------
// Shared option bundles

struct HyperFlags {
  uint32_t stages = 1;
  uint32_t dim = 32;
  uint32_t k = 20;
  std::string loss = "warp";
  double lr = 0.05;
  double C = 1.0;
  double margin = 1.0;
  uint64_t seed = 1;
  uint64_t eval_every = 50000;
  uint32_t patience = 3;
  uint64_t max_updates = 1000000;
  bool freeze_context = false;
  bool warm_start = false;
  uint32_t workers = 1;
};

struct InferFlags {
  std::string strategy = "iterative";
  uint32_t beam_width = 1;
  int64_t stage = -1;  // -1: last trained stage
};

void add_hyper_flags(CLI::App* cmd, HyperFlags& h) {
  cmd->add_option("--stages", h.stages, "Highest cascade iteration T (T+1 stages)")
      ->capture_default_str();
  cmd->add_option("--dim", h.dim, "Latent dimension n")->capture_default_str();
  cmd->add_option("--k", h.k, "Top-k cutoff / position-weight support")
      ->capture_default_str();
  cmd->add_option("--loss", h.loss, "Training loss")
      ->check(CLI::IsMember({"warp", "auc"}))
      ->capture_default_str();
  cmd->add_option("--lr", h.lr, "SGD learning rate")->capture_default_str();
  cmd->add_option("--C", h.C, "Max column norm")->capture_default_str();
  cmd->add_option("--margin", h.margin, "Hinge margin")->capture_default_str();
  cmd->add_option("--seed", h.seed, "Random seed")->capture_default_str();
  cmd->add_option("--eval-every", h.eval_every, "Updates between validation checks")
      ->capture_default_str();
  cmd->add_option("--patience", h.patience,
                  "Stop after this many validation checks without improvement")
      ->capture_default_str();
  cmd->add_option("--max-updates", h.max_updates, "Per-stage update cap")
      ->capture_default_str();
  cmd->add_flag("--freeze-context", h.freeze_context,
                "Do not backpropagate into context columns of S");
  cmd->add_flag("--warm-start", h.warm_start,
                "Initialize stage t from trained stage t-1");
  cmd->add_option("--workers", h.workers,
                  "Parallel update threads (>1 is approximate and nondeterministic)")
      ->capture_default_str();
}

void add_infer_flags(CLI::App* cmd, InferFlags& f) {
  cmd->add_option("--strategy", f.strategy, "Inference strategy")
      ->check(CLI::IsMember({"unstructured", "greedy", "beam", "iterative"}))
      ->capture_default_str();
  cmd->add_option("--beam-width", f.beam_width, "Beam width M")->capture_default_str();
  cmd->add_option("--stage", f.stage, "Cascade iteration to run (-1 = last)")
      ->capture_default_str();
}

TrainConfig to_train_config(const HyperFlags& h, std::ostream* log) {
  TrainConfig c;
  c.stages = h.stages;
  c.n = h.dim;
  c.k = h.k;
  c.loss = h.loss == "auc" ? Loss::kAuc : Loss::kWarp;
  c.learning_rate = h.lr;
  c.C = h.C;
  c.margin = h.margin;
  c.seed = h.seed;
  c.eval_every = h.eval_every;
  c.patience = h.patience;
  c.max_updates = h.max_updates;
  c.freeze_context = h.freeze_context;
  c.warm_start = h.warm_start;
  c.workers = h.workers;
  c.log = log;
  return c;
}

Strategy to_strategy(const std::string& s) {
  if (s == "unstructured") return Strategy::kUnstructured;
  if (s == "greedy") return Strategy::kGreedy;
  if (s == "beam") return Strategy::kBeam;
  if (s == "iterative") return Strategy::kIterative;
  throw ConfigError("unknown strategy: " + s);
}

// Every command echoes its resolved settings so a run can be reproduced from
// its log alone. Flags override config-file values which override defaults.
void echo_config(const CLI::App* cmd) {
  std::cerr << "# effective config: " << cmd->get_name();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || name == "--config") continue;
    std::string value;
    if (!opt->results().empty()) {
      value = opt->results().front();
      if (opt->results().size() > 1) {
        for (size_t i = 1; i < opt->results().size(); ++i) value += "," + opt->results()[i];
      }
    } else {
      value = opt->get_default_str();
      if (value.empty() && opt->get_expected_min() == 0) value = "0";  // unset flag
    }
    std::cerr << ' ' << name.substr(name.find_first_not_of('-')) << '=' << value;
  }
  std::cerr << std::endl;
}

std::string query_vocab_path(const std::string& model_path) {
  return model_path + ".query_vocab.tsv";
}
std::string item_vocab_path(const std::string& model_path) {
  return model_path + ".item_vocab.tsv";
}

// ---------------------------------------------------------------------------
// ingest

struct IngestArgs {
  std::string events_path;
  std::string out_dir;
  uint32_t test_modulus = 5;
  int64_t valid_count = -1;  // -1: one tenth of the training pairs
  bool drop_self_pairs = false;
  uint64_t seed = 1;
};

int cmd_ingest(const IngestArgs& args) {
  std::vector<Event> events = read_events(args.events_path);
  if (events.empty()) throw DataError("no events in " + args.events_path);
  sort_events(events);

  SplitRule rule;
  rule.test_day_modulus = args.test_modulus;
  const auto [train_events, test_events] = split_by_day(events, rule);

  std::vector<TokenPair> train_pairs = extract_pairs(train_events);
  std::vector<TokenPair> test_pairs = extract_pairs(test_events);
  size_t dropped_self = 0;
  if (args.drop_self_pairs) {
    const size_t before = train_pairs.size();
    std::erase_if(train_pairs, [](const TokenPair& p) { return p.first == p.second; });
    dropped_self = before - train_pairs.size();
  }
  if (train_pairs.empty()) throw DataError("no training pairs extracted");

  const auto [query_vocab, item_vocab] = build_vocab(train_pairs);
  const size_t valid_count =
      args.valid_count >= 0 ? static_cast<size_t>(args.valid_count)
                            : train_pairs.size() / 10;
  auto [train_out, valid_out] = hold_out_validation(train_pairs, valid_count, args.seed);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  save_pairs(train_out, (out / "train_pairs.tsv").string());
  save_pairs(valid_out, (out / "valid_pairs.tsv").string());
  save_pairs(test_pairs, (out / "test_pairs.tsv").string());
  query_vocab.save((out / "query_vocab.tsv").string());
  item_vocab.save((out / "item_vocab.tsv").string());

  std::cout << "events=" << events.size() << '\n'
            << "train_pairs=" << train_out.size() << '\n'
            << "valid_pairs=" << valid_out.size() << '\n'
            << "test_pairs=" << test_pairs.size() << '\n'
            << "queries=" << query_vocab.size() << '\n'
            << "items=" << item_vocab.size() << '\n'
            << "dropped_self_pairs=" << dropped_self << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data_dir;
  std::string model_path;
  std::string log_path;
  HyperFlags hyper;
};

int cmd_train(const TrainArgs& args) {
  const fs::path dir(args.data_dir);
  const Vocab query_vocab = Vocab::load((dir / "query_vocab.tsv").string());
  const Vocab item_vocab = Vocab::load((dir / "item_vocab.tsv").string());
  const std::vector<TokenPair> train_tokens =
      load_token_pairs((dir / "train_pairs.tsv").string());
  const std::vector<TokenPair> valid_tokens =
      load_token_pairs((dir / "valid_pairs.tsv").string());
  size_t train_oov = 0, valid_oov = 0;
  const PairSet train_set = map_pairs(train_tokens, query_vocab, item_vocab, &train_oov);
  const PairSet valid_set = map_pairs(valid_tokens, query_vocab, item_vocab, &valid_oov);
  if (train_oov + valid_oov > 0) {
    std::cerr << "# skipped out-of-vocabulary pairs: train=" << train_oov
              << " valid=" << valid_oov << std::endl;
  }

  std::ofstream log_file;
  std::ostream* log = &std::cerr;
  if (!args.log_path.empty()) {
    log_file.open(args.log_path);
    if (!log_file) throw IoError("cannot open training log for writing: " + args.log_path);
    log = &log_file;
  }
  const TrainConfig config = to_train_config(args.hyper, log);
  const Model model = train(train_set, valid_set, config);

  save_model(model, args.model_path);
  query_vocab.save(query_vocab_path(args.model_path));
  item_vocab.save(item_vocab_path(args.model_path));
  std::cout << "model=" << args.model_path << '\n'
            << "stages=" << model.stages.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval / predict helpers

struct LoadedModel {
  Model model;
  Vocab query_vocab;
  Vocab item_vocab;
};

LoadedModel load_model_with_vocabs(const std::string& model_path) {
  LoadedModel lm;
  lm.model = load_model(model_path);
  const std::string qpath = query_vocab_path(model_path);
  const std::string ipath = item_vocab_path(model_path);
  lm.query_vocab = Vocab::load(qpath);
  lm.item_vocab = Vocab::load(ipath);
  if (lm.query_vocab.size() != lm.model.D_q || lm.item_vocab.size() != lm.model.D_items) {
    throw DataError("model " + model_path + " expects D_q=" + std::to_string(lm.model.D_q) +
                    ", D_items=" + std::to_string(lm.model.D_items) +
                    " but vocabularies " + qpath + " and " + ipath + " hold " +
                    std::to_string(lm.query_vocab.size()) + " and " +
                    std::to_string(lm.item_vocab.size()) + " tokens");
  }
  return lm;
}

InferenceConfig to_inference_config(const Model& model, const InferFlags& flags,
                                    uint32_t k) {
  InferenceConfig cfg;
  cfg.k = k;
  cfg.strategy = to_strategy(flags.strategy);
  cfg.beam_width = flags.beam_width;
  if (flags.stage < 0) {
    cfg.stages_to_run = model.max_stage();
  } else if (static_cast<size_t>(flags.stage) >= model.stages.size()) {
    throw ConfigError("stage " + std::to_string(flags.stage) + " out of range; model has " +
                      std::to_string(model.stages.size()) + " stages");
  } else {
    cfg.stages_to_run = static_cast<uint32_t>(flags.stage);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string model_path;
  std::string pairs_path;
  std::vector<uint32_t> ks = {5, 10, 30, 50};
  bool json = false;
  InferFlags infer;
};

int cmd_eval(const EvalArgs& args) {
  const LoadedModel lm = load_model_with_vocabs(args.model_path);
  const std::vector<TokenPair> tokens = load_token_pairs(args.pairs_path);
  size_t skipped = 0;
  const PairSet test = map_pairs(tokens, lm.query_vocab, lm.item_vocab, &skipped);
  const InferenceConfig cfg = to_inference_config(lm.model, args.infer, lm.model.k);
  const EvalReport report = evaluate(lm.model, test, args.ks, cfg, skipped);
  if (args.json) {
    write_report_json(report, std::cout);
  } else {
    write_report_text(report, std::cout);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  std::string model_path;
  std::string query_token;
  std::string features;  // sparse "idx:val,idx:val" alternative to a token
  uint32_t k = 0;        // 0: model k
  InferFlags infer;
};

Query parse_feature_query(const std::string& text, uint32_t D_q) {
  Query q;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string part = text.substr(start, end - start);
    const size_t colon = part.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("bad feature entry '" + part + "', expected idx:value");
    }
    const uint32_t idx = static_cast<uint32_t>(std::stoul(part.substr(0, colon)));
    if (idx >= D_q) {
      throw ConfigError("feature index " + std::to_string(idx) + " out of range (D_q=" +
                        std::to_string(D_q) + ")");
    }
    q.idx.push_back(idx);
    q.val.push_back(std::stof(part.substr(colon + 1)));
    start = end + 1;
  }
  if (q.idx.empty()) throw ConfigError("empty feature query");
  return q;
}

int cmd_predict(const PredictArgs& args) {
  const LoadedModel lm = load_model_with_vocabs(args.model_path);
  Query q;
  if (!args.features.empty()) {
    q = parse_feature_query(args.features, lm.model.D_q);
  } else {
    const auto idx = lm.query_vocab.lookup(args.query_token);
    if (!idx) throw DataError("unknown query token '" + args.query_token + "'");
    q = Query::one_hot(*idx);
  }
  const uint32_t k = args.k == 0 ? lm.model.k : args.k;
  const InferenceConfig cfg = to_inference_config(lm.model, args.infer, k);
  const PositionWeights w = position_weights(k, lm.model.weight_scheme);

  RankedList list;
  switch (cfg.strategy) {
    case Strategy::kUnstructured:
      list = top_k_unstructured(lm.model.stages.front(), q, k);
      break;
    case Strategy::kGreedy:
      list = infer_greedy(lm.model.stages[cfg.stages_to_run], q, k, w);
      break;
    case Strategy::kBeam:
      list = infer_beam(lm.model.stages[cfg.stages_to_run], q, k, cfg.beam_width, w);
      break;
    case Strategy::kIterative:
      list = infer_iterative(lm.model, q, cfg).final_list();
      break;
  }
  char buf[64];
  for (size_t i = 0; i < list.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f", list.scores[i]);
    std::cout << (i + 1) << '\t' << lm.item_vocab.token(list.items[i]) << '\t' << buf
              << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench-synthetic

struct BenchArgs {
  uint32_t seeds = 10;
  uint64_t first_seed = 1;
  double noise = 0.4;
  bool compare_losses = false;
  HyperFlags hyper;
};

int cmd_bench(const BenchArgs& args) {
  uint32_t t1_wins = 0;
  uint32_t warp_wins = 0;
  double improvement_sum = 0.0;
  char buf[160];
  for (uint32_t i = 0; i < args.seeds; ++i) {
    const uint64_t seed = args.first_seed + i;
    SyntheticSpec spec;
    spec.noise = args.noise;
    spec.seed = seed;
    TrainConfig config = synthetic_train_config(seed);
    config.loss = args.hyper.loss == "auc" ? Loss::kAuc : Loss::kWarp;
    config.learning_rate = args.hyper.lr;
    config.C = args.hyper.C;
    config.max_updates = args.hyper.max_updates;
    config.eval_every = args.hyper.eval_every;
    config.patience = args.hyper.patience;
    const BenchResult r = run_synthetic_benchmark(spec, config, args.compare_losses);
    t1_wins += r.recall_t1 >= r.recall_t0 ? 1 : 0;
    improvement_sum += r.recall_t1 - r.recall_t0;
    std::snprintf(buf, sizeof(buf), "seed=%llu recall@%u_t0=%.4f recall@%u_t1=%.4f",
                  static_cast<unsigned long long>(seed), config.k, r.recall_t0, config.k,
                  r.recall_t1);
    std::cout << buf;
    if (r.has_auc) {
      warp_wins += r.recall_t0 >= r.recall_auc_t0 ? 1 : 0;
      std::snprintf(buf, sizeof(buf), " recall@%u_auc_t0=%.4f", config.k, r.recall_auc_t0);
      std::cout << buf;
    }
    std::cout << std::endl;
  }
  std::snprintf(buf, sizeof(buf), "t1_wins=%u/%u mean_improvement=%.4f", t1_wins,
                args.seeds, improvement_sum / args.seeds);
  std::cout << buf;
  if (args.compare_losses) {
    std::snprintf(buf, sizeof(buf), " warp_wins=%u/%u", warp_wins, args.seeds);
    std::cout << buf;
  }
  std::cout << std::endl;
  return 0;
}

// ---------------------------------------------------------------------------
// --config FILE: flat key=value lines merged in as flags. Keys already given
// on the command line keep their value; within the file the last write wins.

std::string trim_ws(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) return args;

  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::set<std::string> given = {"config"};
  for (const std::string& a : args) {
    if (a.rfind("--", 0) == 0) {
      const size_t eq = a.find('=');
      given.insert(a.substr(2, eq == std::string::npos ? eq : eq - 2));
    }
  }

  std::map<std::string, std::string> from_file;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim_ws(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const size_t eq = stripped.find('=');
    const std::string key = eq == std::string::npos ? "" : trim_ws(stripped.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    from_file[key] = trim_ws(stripped.substr(eq + 1));
  }
  for (const auto& [key, value] : from_file) {
    if (!given.count(key)) args.push_back("--" + key + "=" + value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lasr: latent structured ranking trainer and ranker"};
  app.require_subcommand(1);
  std::string config_file;

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "Split an event log into train/valid/test pairs and vocabularies");
  ingest->add_option("--events", ingest_args.events_path,
                     "Event log: user<TAB>timestamp<TAB>item per line")
      ->required();
  ingest->add_option("--out", ingest_args.out_dir, "Output directory")->required();
  ingest->add_option("--test-modulus", ingest_args.test_modulus,
                     "Every test-modulus-th day becomes test data")
      ->capture_default_str();
  ingest->add_option("--valid-count", ingest_args.valid_count,
                     "Validation pairs held out of training (-1 = one tenth)")
      ->capture_default_str();
  ingest->add_flag("--drop-self-pairs", ingest_args.drop_self_pairs,
                   "Drop (A,A) pairs from the training splits");
  ingest->add_option("--seed", ingest_args.seed, "Holdout seed")->capture_default_str();
  ingest->add_option("--config", config_file, "key=value config file; flags override it");

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a cascade on an ingested directory");
  train_cmd->add_option("--data", train_args.data_dir, "Ingested data directory")
      ->required();
  train_cmd->add_option("--model", train_args.model_path, "Output model path")
      ->required();
  train_cmd->add_option("--log", train_args.log_path,
                        "Write training progress here instead of stderr");
  add_hyper_flags(train_cmd, train_args.hyper);
  train_cmd->add_option("--config", config_file, "key=value config file; flags override it");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a pairs file");
  eval_cmd->add_option("--model", eval_args.model_path, "Model path")->required();
  eval_cmd->add_option("--pairs", eval_args.pairs_path, "Test pairs TSV")->required();
  eval_cmd->add_option("--ks", eval_args.ks, "Recall cutoffs")
      ->delimiter(',')
      ->capture_default_str();
  eval_cmd->add_flag("--json", eval_args.json, "Emit the report as JSON");
  add_infer_flags(eval_cmd, eval_args.infer);
  eval_cmd->add_option("--config", config_file, "key=value config file; flags override it");

  PredictArgs predict_args;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "Rank items for one query token");
  predict_cmd->add_option("--model", predict_args.model_path, "Model path")->required();
  predict_cmd->add_option("--query", predict_args.query_token, "Query token");
  predict_cmd->add_option("--features", predict_args.features,
                          "Sparse query features idx:val[,idx:val...]");
  predict_cmd->add_option("--k", predict_args.k, "List length (0 = model k)")
      ->capture_default_str();
  add_infer_flags(predict_cmd, predict_args.infer);
  predict_cmd->add_option("--config", config_file, "key=value config file; flags override it");

  BenchArgs bench_args;
  {
    // flag defaults mirror the tuned benchmark config rather than the train defaults
    const TrainConfig tuned = synthetic_train_config(0);
    bench_args.hyper.lr = tuned.learning_rate;
    bench_args.hyper.C = tuned.C;
    bench_args.hyper.max_updates = tuned.max_updates;
    bench_args.hyper.eval_every = tuned.eval_every;
    bench_args.hyper.patience = tuned.patience;
  }
  CLI::App* bench_cmd = app.add_subcommand(
      "bench-synthetic", "Clustered synthetic benchmark: cascade t=1 vs t=0");
  bench_cmd->add_option("--seeds", bench_args.seeds, "Number of seeds")
      ->capture_default_str();
  bench_cmd->add_option("--first-seed", bench_args.first_seed, "First seed")
      ->capture_default_str();
  bench_cmd->add_option("--noise", bench_args.noise, "Group-wide noise play rate")
      ->capture_default_str();
  bench_cmd->add_flag("--compare-losses", bench_args.compare_losses,
                      "Also train the other loss at t=0 on each seed");
  add_hyper_flags(bench_cmd, bench_args.hyper);
  bench_cmd->add_option("--config", config_file, "key=value config file; flags override it");

  std::vector<std::string> args;
  try {
    args = expand_config_args(argc, argv);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*ingest) {
      echo_config(ingest);
      return cmd_ingest(ingest_args);
    }
    if (*train_cmd) {
      echo_config(train_cmd);
      return cmd_train(train_args);
    }
    if (*eval_cmd) {
      echo_config(eval_cmd);
      return cmd_eval(eval_args);
    }
    if (*predict_cmd) {
      echo_config(predict_cmd);
      if (predict_args.query_token.empty() && predict_args.features.empty()) {
        throw ConfigError("predict needs --query or --features");
      }
      return cmd_predict(predict_args);
    }
    if (*bench_cmd) {
      echo_config(bench_cmd);
      return cmd_bench(bench_args);
    }
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << std::endl;
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << std::endl;
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}
