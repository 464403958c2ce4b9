#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lasr/data.hpp"
#include "lasr/trainer.hpp"

namespace lasr {

// Clustered ranking task with planted decoys. Items carry two independent
// labels: a cluster (d mod clusters) and a group (d div pool, one disjoint
// pool of `D / groups` items per group). Each query targets one
// (group, cluster) combination; its true positives are the pool items of
// that cluster. Training pairs mix true positives with group-wide noise
// plays, so a low-rank base model learns strong affinity for same-group
// decoy items whose cluster is wrong. Test pairs are clean positives only.
struct SyntheticSpec {
  uint32_t D = 500;
  uint32_t clusters = 10;
  uint32_t groups = 10;
  uint32_t queries_per_combo = 2;  // queries = groups * clusters * this
  uint32_t train_pairs_per_query = 40;
  uint32_t valid_pairs_per_query = 5;
  uint32_t test_pairs_per_query = 2;
  double noise = 0.4;  // fraction of training plays drawn group-wide
  uint64_t seed = 1;
};

struct SyntheticData {
  PairSet train;
  PairSet valid;
  PairSet test;
  std::vector<uint32_t> cluster_of;  // per item
  std::vector<uint32_t> group_of;    // per item
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// One benchmark run: train a two-stage cascade on the synthetic task and
// evaluate held-out recall@k of cascade iterations 0 and 1, plus optionally
// a separately trained single-stage model under the other loss.
struct BenchResult {
  double recall_t0 = 0.0;
  double recall_t1 = 0.0;
  double recall_auc_t0 = 0.0;
  bool has_auc = false;
};

BenchResult run_synthetic_benchmark(const SyntheticSpec& spec, const TrainConfig& config,
                                    bool compare_losses);

// Default training configuration for the synthetic task (T=1, n=16, k=5).
TrainConfig synthetic_train_config(uint64_t seed);

}  // namespace lasr
