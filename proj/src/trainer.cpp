#include "lasr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <thread>

#include "lasr/error.hpp"
#include "lasr/rng.hpp"

namespace lasr {

namespace {

bool params_finite(const StageParams& p) {
  const auto ok = [](const Matrix& m) {
    const float* d = m.data();
    for (size_t i = 0; i < m.size(); ++i) {
      if (!std::isfinite(d[i])) return false;
    }
    return true;
  };
  return ok(p.U) && ok(p.V) && ok(p.S);
}

// Distinct query ids in first-occurrence order.
std::vector<uint32_t> distinct_queries(const PairSet& set, uint32_t D_q) {
  std::vector<char> seen(D_q, 0);
  std::vector<uint32_t> out;
  for (const auto& [q, d] : set.pairs) {
    if (q < D_q && !seen[q]) {
      seen[q] = 1;
      out.push_back(q);
    }
  }
  return out;
}

// Frozen stage t-1 lists for every validation query; stages < t do not move
// during stage-t training, so one pass per stage suffices.
std::vector<RankedList> validation_contexts(const Model& model, const PairSet& valid,
                                            uint32_t t, uint32_t k) {
  std::vector<RankedList> out(model.D_q);
  InferenceConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::kIterative;
  cfg.stages_to_run = t - 1;
  for (uint32_t q : distinct_queries(valid, model.D_q)) {
    out[q] = infer_iterative(model, Query::one_hot(q), cfg).final_list();
  }
  return out;
}

}  // namespace

void sgd_step(StageParams& stage, const Query& q, uint32_t d_pos, uint32_t d_neg,
              double multiplier, double lr, const RankedList* context,
              const PositionWeights& w, double C, bool freeze_context) {
  const double g = lr * multiplier;
  if (g == 0.0) return;
  const uint32_t n = stage.U.rows();
  const bool structured = context != nullptr && !context->empty();

  // Every read happens before any write, so updates to coinciding columns
  // (a context item that is also d_pos or d_neg) accumulate all their terms.
  const std::vector<double> u = query_embedding(stage, q);
  const std::span<const float> vp_read = stage.V.col(d_pos);
  const std::span<const float> vn_read = stage.V.col(d_neg);
  std::vector<double> dv(n);
  for (uint32_t i = 0; i < n; ++i) {
    dv[i] = static_cast<double>(vp_read[i]) - static_cast<double>(vn_read[i]);
  }
  std::vector<double> c, ds;
  if (structured) {
    c = context_vector(stage, *context, w);
    ds.resize(n);
    const std::span<const float> sp = stage.S.col(d_pos);
    const std::span<const float> sn = stage.S.col(d_neg);
    for (uint32_t i = 0; i < n; ++i) {
      ds[i] = static_cast<double>(sp[i]) - static_cast<double>(sn[i]);
    }
  }

  for (size_t j = 0; j < q.nnz(); ++j) {
    const double gq = g * q.val[j];
    const std::span<float> col = stage.U.col(q.idx[j]);
    for (uint32_t i = 0; i < n; ++i) col[i] += static_cast<float>(gq * dv[i]);
  }
  {
    const std::span<float> vp = stage.V.col(d_pos);
    const std::span<float> vn = stage.V.col(d_neg);
    for (uint32_t i = 0; i < n; ++i) {
      const float step = static_cast<float>(g * u[i]);
      vp[i] += step;
      vn[i] -= step;
    }
  }
  if (structured) {
    const std::span<float> sp = stage.S.col(d_pos);
    const std::span<float> sn = stage.S.col(d_neg);
    for (uint32_t i = 0; i < n; ++i) {
      const float step = static_cast<float>(g * c[i]);
      sp[i] += step;
      sn[i] -= step;
    }
    if (!freeze_context) {
      for (size_t j = 0; j < context->size(); ++j) {
        const double gw = g * w.weight(static_cast<uint32_t>(j) + 1);
        const std::span<float> col = stage.S.col(context->items[j]);
        for (uint32_t i = 0; i < n; ++i) col[i] += static_cast<float>(gw * ds[i]);
      }
    }
  }

  for (size_t j = 0; j < q.nnz(); ++j) project_column(stage.U, q.idx[j], C);
  project_column(stage.V, d_pos, C);
  project_column(stage.V, d_neg, C);
  if (structured) {
    project_column(stage.S, d_pos, C);
    project_column(stage.S, d_neg, C);
    if (!freeze_context) {
      for (const uint32_t item : context->items) project_column(stage.S, item, C);
    }
  }
}

double validation_recall(const Model& model, uint32_t t, const PairSet& valid,
                         const std::vector<RankedList>& valid_contexts, uint32_t k) {
  const StageParams& stage = model.stages[t];
  const PositionWeights w = position_weights(model.k, model.weight_scheme);
  size_t hits = 0;
  for (const auto& [qi, di] : valid.pairs) {
    const Query q = Query::one_hot(qi);
    const std::vector<double> u = query_embedding(stage, q);
    std::vector<double> c;
    if (t > 0) c = context_vector(stage, valid_contexts[qi], w);
    double pos = dot(u, stage.V.col(di));
    if (t > 0) pos += dot(std::span<const double>(c), stage.S.col(di));
    uint32_t better_count = 0;
    for (uint32_t d = 0; d < model.D_items && better_count < k; ++d) {
      if (d == di) continue;
      double s = dot(u, stage.V.col(d));
      if (t > 0) s += dot(std::span<const double>(c), stage.S.col(d));
      if (TopKHeap::better(s, d, pos, di)) ++better_count;
    }
    if (better_count < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(valid.pairs.size());
}

double violation_rate(const Model& model, uint32_t t, const PairSet& probe,
                      const ContextCache* cache, double margin, uint64_t seed) {
  if (probe.pairs.empty()) throw ConfigError("probe pair set is empty");
  const StageParams& stage = model.stages[t];
  const PositionWeights w = position_weights(model.k, model.weight_scheme);
  Rng rng(seed);
  size_t violations = 0;
  for (const auto& [qi, d_pos] : probe.pairs) {
    const Query q = Query::one_hot(qi);
    const std::vector<double> u = query_embedding(stage, q);
    std::vector<double> c;
    if (t > 0 && cache != nullptr) c = context_vector(stage, cache->lists[qi], w);
    const auto score = [&](uint32_t d) {
      double s = dot(u, stage.V.col(d));
      if (!c.empty()) s += dot(std::span<const double>(c), stage.S.col(d));
      return s;
    };
    uint32_t d_neg = rng.uniform_u32(model.D_items - 1);
    if (d_neg >= d_pos) ++d_neg;
    if (margin - score(d_pos) + score(d_neg) > 0.0) ++violations;
  }
  return static_cast<double>(violations) / static_cast<double>(probe.pairs.size());
}

StageParams train_stage(Model& model, const PairSet& train, const PairSet& valid,
                        uint32_t t, const ContextCache* cache, const TrainConfig& config) {
  if (t >= model.stages.size()) throw ConfigError("stage index out of range");
  if (train.pairs.empty()) throw ConfigError("training pair set is empty");
  if (valid.pairs.empty()) throw ConfigError("validation pair set is empty");
  if (model.D_items < 2) throw ConfigError("need at least two items to sample negatives");
  if (config.eval_every == 0) throw ConfigError("eval_every must be positive");
  if (config.patience == 0) throw ConfigError("patience must be positive");
  if (t == 0) {
    if (cache != nullptr) throw ConfigError("stage 0 takes no context cache");
  } else {
    if (cache == nullptr) {
      throw ConfigError("stage " + std::to_string(t) + " requires a context cache");
    }
    for (const auto& [q, d] : train.pairs) {
      if (q >= cache->lists.size() || cache->lists[q].empty()) {
        throw ConfigError("context cache has no list for training query " +
                          std::to_string(q));
      }
    }
  }

  StageParams& stage = model.stages[t];
  const PositionWeights w = position_weights(model.k, model.weight_scheme);
  const RankLossTable loss_table(model.D_items - 1, config.loss);
  const uint32_t D = model.D_items;

  std::vector<RankedList> valid_contexts;
  if (t > 0) valid_contexts = validation_contexts(model, valid, t, model.k);

  const auto one_step = [&](Rng& rng) {
    const auto& pair = train.pairs[rng.uniform_u32(static_cast<uint32_t>(train.pairs.size()))];
    const Query q = Query::one_hot(pair.first);
    const uint32_t d_pos = pair.second;
    const RankedList* context = t > 0 ? &cache->lists[pair.first] : nullptr;
    const std::vector<double> u = query_embedding(stage, q);
    std::vector<double> c;
    if (context != nullptr) c = context_vector(stage, *context, w);
    const std::function<double(uint32_t)> scorer = [&](uint32_t d) {
      double s = dot(u, stage.V.col(d));
      if (context != nullptr) s += dot(std::span<const double>(c), stage.S.col(d));
      return s;
    };
    const double f_pos = scorer(d_pos);
    const ViolationSample v = sample_violator(scorer, f_pos, d_pos, D, config.margin, rng);
    if (!v.violating) return;
    const double multiplier = loss_table((D - 1) / v.trials);
    sgd_step(stage, q, d_pos, *v.negative, multiplier, config.learning_rate, context, w,
             config.C, config.freeze_context);
  };

  StageParams best = stage;
  double best_recall = -1.0;
  uint32_t stale = 0;
  uint64_t updates = 0;
  uint64_t window_no = 0;
  Rng rng = Rng::derive(config.seed, 0x53414D50ULL + t);
  bool stop = config.max_updates == 0;

  while (!stop) {
    const uint64_t window =
        std::min<uint64_t>(config.eval_every, config.max_updates - updates);
    if (config.workers <= 1) {
      for (uint64_t i = 0; i < window; ++i) one_step(rng);
    } else {
      // Lock-free parallel window: approximate, intentionally unsynchronized,
      // and not deterministic. Single-worker mode is the reproducible path.
      std::vector<std::thread> pool;
      const uint64_t share = window / config.workers;
      const uint64_t extra = window % config.workers;
      for (uint32_t worker = 0; worker < config.workers; ++worker) {
        const uint64_t count = share + (worker < extra ? 1 : 0);
        if (count == 0) continue;
        pool.emplace_back([&, worker, count] {
          Rng wrng = Rng::derive(config.seed, 0x574B0000ULL +
                                                  (static_cast<uint64_t>(t) << 40) +
                                                  (window_no << 8) + worker);
          for (uint64_t i = 0; i < count; ++i) one_step(wrng);
        });
      }
      for (std::thread& th : pool) th.join();
    }
    updates += window;
    ++window_no;

    const double recall = validation_recall(model, t, valid, valid_contexts, config.k);
    if (config.log != nullptr) {
      char line[96];
      std::snprintf(line, sizeof(line), "stage=%u updates=%llu valid_recall@%u=%.6f", t,
                    static_cast<unsigned long long>(updates), config.k, recall);
      *config.log << line << std::endl;
    }
    if (!params_finite(stage)) {
      throw NumericError("non-finite parameter in stage " + std::to_string(t) +
                         " after " + std::to_string(updates) + " updates");
    }
    if (recall > best_recall) {
      best_recall = recall;
      best = stage;
      stale = 0;
    } else if (++stale >= config.patience) {
      stop = true;
    }
    if (updates >= config.max_updates) stop = true;
  }

  stage = best;
  return best;
}

ContextCache cache_top_k(const Model& model, const PairSet& train, uint32_t t,
                         uint32_t k) {
  ContextCache cache;
  cache.lists.resize(model.D_q);
  InferenceConfig cfg;
  cfg.k = k;
  cfg.strategy = Strategy::kIterative;
  cfg.stages_to_run = t;
  for (uint32_t q : distinct_queries(train, model.D_q)) {
    cache.lists[q] = infer_iterative(model, Query::one_hot(q), cfg).final_list();
  }
  return cache;
}

ContextCache advance_cache(const Model& model, const PairSet& train, uint32_t t,
                           uint32_t k, const ContextCache& prev) {
  if (t == 0) throw ConfigError("advance_cache starts from stage 1");
  const StageParams& stage = model.stages[t];
  const PositionWeights w = position_weights(k, model.weight_scheme);
  ContextCache cache;
  cache.lists.resize(model.D_q);
  for (uint32_t qi : distinct_queries(train, model.D_q)) {
    const Query q = Query::one_hot(qi);
    const std::vector<double> u = query_embedding(stage, q);
    const std::vector<double> c = context_vector(stage, prev.lists[qi], w);
    TopKHeap heap(k);
    for (uint32_t d = 0; d < model.D_items; ++d) {
      heap.offer(context_score(stage, dot(u, stage.V.col(d)), c, d), d);
    }
    cache.lists[qi] = heap.take_sorted();
  }
  return cache;
}

Model train(const PairSet& train_set, const PairSet& valid_set, const TrainConfig& config) {
  if (config.n == 0) throw ConfigError("latent dimension must be positive");
  if (config.k == 0) throw ConfigError("k must be positive");
  if (train_set.pairs.empty()) throw ConfigError("training pair set is empty");
  if (valid_set.pairs.empty()) throw ConfigError("validation pair set is empty");
  if (train_set.D_q() != valid_set.D_q() ||
      train_set.D_items() != valid_set.D_items()) {
    throw ConfigError("train and validation vocabularies disagree");
  }

  Model model;
  model.n = config.n;
  model.D_q = train_set.D_q();
  model.D_items = train_set.D_items();
  model.k = config.k;
  model.weight_scheme = config.weight_scheme;
  model.stages.resize(config.stages + 1);

  const auto check_range = [&](const PairSet& set, const char* name) {
    for (const auto& [q, d] : set.pairs) {
      if (q >= model.D_q || d >= model.D_items) {
        throw DataError(std::string(name) + " pair (" + std::to_string(q) + ", " +
                        std::to_string(d) + ") is outside the vocabularies");
      }
    }
  };
  check_range(train_set, "train");
  check_range(valid_set, "validation");

  ContextCache cache;
  for (uint32_t t = 0; t <= config.stages; ++t) {
    model.stages[t] = (config.warm_start && t > 0)
                          ? model.stages[t - 1]
                          : init_stage(config.n, model.D_q, model.D_items,
                                       Rng::derive_seed(config.seed, t));
    train_stage(model, train_set, valid_set, t, t == 0 ? nullptr : &cache, config);
    if (t < config.stages) {
      cache = t == 0 ? cache_top_k(model, train_set, 0, config.k)
                     : advance_cache(model, train_set, t, config.k, cache);
    }
  }
  if (!model.all_finite()) {
    throw NumericError("trained model contains non-finite parameters");
  }
  return model;
}

}  // namespace lasr
