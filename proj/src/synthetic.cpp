#include "lasr/synthetic.hpp"

#include <string>

#include "lasr/error.hpp"
#include "lasr/evaluate.hpp"
#include "lasr/rng.hpp"

namespace lasr {

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.clusters < 2 || spec.groups < 1) {
    throw ConfigError("synthetic task needs >= 2 clusters and >= 1 group");
  }
  if (spec.D % (spec.groups * spec.clusters) != 0) {
    throw ConfigError("item count must be divisible by groups * clusters");
  }
  const uint32_t pool = spec.D / spec.groups;           // items per group
  const uint32_t per_cluster = pool / spec.clusters;    // positives per query
  const uint32_t combos = spec.groups * spec.clusters;
  const uint32_t Q = combos * spec.queries_per_combo;

  SyntheticData data;
  data.cluster_of.resize(spec.D);
  data.group_of.resize(spec.D);
  for (uint32_t d = 0; d < spec.D; ++d) {
    data.cluster_of[d] = d % spec.clusters;
    data.group_of[d] = d / pool;
  }

  Vocab query_vocab, item_vocab;
  for (uint32_t q = 0; q < Q; ++q) query_vocab.add("q" + std::to_string(q));
  for (uint32_t d = 0; d < spec.D; ++d) item_vocab.add("item" + std::to_string(d));
  data.train.query_vocab = query_vocab;
  data.train.item_vocab = item_vocab;
  data.valid.query_vocab = query_vocab;
  data.valid.item_vocab = item_vocab;
  data.test.query_vocab = query_vocab;
  data.test.item_vocab = item_vocab;

  // Item ids of each query's true positives: the pool items of its cluster.
  const auto positive = [&](uint32_t group, uint32_t cluster, uint32_t i) {
    return group * pool + i * spec.clusters + cluster;
  };

  Rng train_rng = Rng::derive(spec.seed, 1);
  Rng valid_rng = Rng::derive(spec.seed, 2);
  Rng test_rng = Rng::derive(spec.seed, 3);
  for (uint32_t q = 0; q < Q; ++q) {
    const uint32_t combo = q % combos;
    const uint32_t group = combo / spec.clusters;
    const uint32_t cluster = combo % spec.clusters;
    const auto noisy_draw = [&](Rng& rng) {
      if (rng.uniform() < spec.noise) {
        return group * pool + rng.uniform_u32(pool);  // anywhere in the group
      }
      return positive(group, cluster, rng.uniform_u32(per_cluster));
    };
    for (uint32_t i = 0; i < spec.train_pairs_per_query; ++i) {
      data.train.pairs.emplace_back(q, noisy_draw(train_rng));
    }
    for (uint32_t i = 0; i < spec.valid_pairs_per_query; ++i) {
      data.valid.pairs.emplace_back(q, noisy_draw(valid_rng));
    }
    for (uint32_t i = 0; i < spec.test_pairs_per_query; ++i) {
      data.test.pairs.emplace_back(q, positive(group, cluster, test_rng.uniform_u32(per_cluster)));
    }
  }
  return data;
}

TrainConfig synthetic_train_config(uint64_t seed) {
  TrainConfig config;
  config.stages = 1;
  config.n = 16;
  config.k = 5;
  config.loss = Loss::kWarp;
  config.learning_rate = 0.05;
  config.C = 1.0;
  config.margin = 1.0;
  config.eval_every = 2000;
  config.patience = 3;
  config.max_updates = 30000;
  config.seed = seed;
  return config;
}

BenchResult run_synthetic_benchmark(const SyntheticSpec& spec, const TrainConfig& config,
                                    bool compare_losses) {
  const SyntheticData data = generate_synthetic(spec);
  BenchResult result;

  const Model cascade = train(data.train, data.valid, config);
  InferenceConfig eval_cfg;
  eval_cfg.k = config.k;
  eval_cfg.strategy = Strategy::kIterative;
  eval_cfg.stages_to_run = 0;
  result.recall_t0 = evaluate(cascade, data.test, {config.k}, eval_cfg).recall_at.at(config.k);
  eval_cfg.stages_to_run = 1;
  result.recall_t1 = evaluate(cascade, data.test, {config.k}, eval_cfg).recall_at.at(config.k);

  if (compare_losses) {
    TrainConfig other = config;
    other.loss = config.loss == Loss::kWarp ? Loss::kAuc : Loss::kWarp;
    other.stages = 0;
    const Model flat = train(data.train, data.valid, other);
    eval_cfg.stages_to_run = 0;
    result.recall_auc_t0 =
        evaluate(flat, data.test, {config.k}, eval_cfg).recall_at.at(config.k);
    result.has_auc = true;
  }
  return result;
}

}  // namespace lasr
