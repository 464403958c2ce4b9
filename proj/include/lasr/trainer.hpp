#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "lasr/data.hpp"
#include "lasr/inference.hpp"
#include "lasr/loss.hpp"
#include "lasr/model.hpp"

namespace lasr {

// Frozen per-query top-k lists from the previous cascade stage, indexed by
// query id. Queries absent from the training set keep empty lists.
struct ContextCache {
  std::vector<RankedList> lists;

  const RankedList& list(uint32_t q) const { return lists[q]; }
  bool empty() const { return lists.empty(); }
};

struct TrainConfig {
  uint32_t stages = 1;  // highest cascade iteration T; the model has T+1 stages
  uint32_t k = 20;
  uint32_t n = 32;
  Loss loss = Loss::kWarp;
  double learning_rate = 0.05;
  double C = 1.0;
  double margin = 1.0;
  uint64_t eval_every = 50000;  // validation cadence, in updates
  uint32_t patience = 3;        // stop after this many evaluations without improvement
  uint64_t max_updates = 1000000;  // per-stage cap; 0 trains nothing
  uint64_t seed = 1;
  bool freeze_context = false;  // skip the gradient through context columns of S
  bool warm_start = false;      // start stage t from stage t-1 instead of random init
  uint32_t workers = 1;  // >1: lock-free parallel updates, approximate + nondeterministic
  WeightScheme weight_scheme = WeightScheme::kSparseHarmonic;
  std::ostream* log = nullptr;  // progress lines, one per evaluation; null = silent
};

// One hinge step scaled by `multiplier` (the sampled rank loss), touching the
// U columns in the query support, the V columns of both items, and - when a
// context is given - the S columns of both items plus every context column
// (unless frozen). Reads happen before any write so coinciding columns
// accumulate every contribution; every touched column is then rescaled back
// to norm <= C. A zero step (lr = 0) leaves the parameters untouched.
void sgd_step(StageParams& stage, const Query& q, uint32_t d_pos, uint32_t d_neg,
              double multiplier, double lr, const RankedList* context,
              const PositionWeights& w, double C, bool freeze_context = false);

// Runs the sample -> find-violator -> step loop on stage t, evaluating
// validation recall@k with the current cascade every eval_every updates. An
// update is one sampled pair, violating or not, so the loop always reaches
// its evaluation points. Stops after `patience` evaluations without
// improvement or at max_updates; the stage is left at (and returned as) its
// best-validation snapshot.
StageParams train_stage(Model& model, const PairSet& train, const PairSet& valid,
                        uint32_t t, const ContextCache* cache, const TrainConfig& config);

// Per-training-query iterative-inference lists after stage t, recomputed from
// stage 0 upward.
ContextCache cache_top_k(const Model& model, const PairSet& train, uint32_t t,
                         uint32_t k);

// Same result for t >= 1, advancing an existing stage t-1 cache by one stage
// instead of rerunning the whole cascade.
ContextCache advance_cache(const Model& model, const PairSet& train, uint32_t t,
                           uint32_t k, const ContextCache& prev);

// Full cascade training: initializes every stage, then alternates train_stage
// and context-cache rebuilds for t = 0..T.
Model train(const PairSet& train, const PairSet& valid, const TrainConfig& config);

// Validation recall@k of stage t against frozen per-query contexts (empty for
// t = 0). Exposed for the trainer's own stopping rule and for tests.
double validation_recall(const Model& model, uint32_t t, const PairSet& valid,
                         const std::vector<RankedList>& valid_contexts, uint32_t k);

// Hinge-violation rate of stage t over a probe set: the fraction of pairs for
// which a uniformly sampled negative violates the margin. Diagnostic only.
double violation_rate(const Model& model, uint32_t t, const PairSet& probe,
                      const ContextCache* cache, double margin, uint64_t seed);

}  // namespace lasr
