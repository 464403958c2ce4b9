#include "lasr/inference.hpp"

#include <algorithm>
#include <limits>

#include "lasr/error.hpp"

namespace lasr {

namespace {

// Heap comparator: the front must be the worst kept entry.
bool heap_before(const double sa, const uint32_t ia, const double sb, const uint32_t ib) {
  return TopKHeap::better(sa, ia, sb, ib);
}

void check_k(uint32_t k, uint32_t D_items) {
  if (k < 1) throw ConfigError("k must be >= 1");
  if (k > D_items) {
    throw ConfigError("k=" + std::to_string(k) + " exceeds item count " +
                      std::to_string(D_items));
  }
}

}  // namespace

void TopKHeap::offer(double score, uint32_t id) {
  auto cmp = [](const Entry& a, const Entry& b) {
    return heap_before(a.score, a.id, b.score, b.id);
  };
  if (entries_.size() < k_) {
    entries_.push_back({score, id});
    std::push_heap(entries_.begin(), entries_.end(), cmp);
    return;
  }
  const Entry& worst = entries_.front();
  if (better(score, id, worst.score, worst.id)) {
    std::pop_heap(entries_.begin(), entries_.end(), cmp);
    entries_.back() = {score, id};
    std::push_heap(entries_.begin(), entries_.end(), cmp);
  }
}

RankedList TopKHeap::take_sorted() {
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return better(a.score, a.id, b.score, b.id);
  });
  RankedList list;
  list.items.reserve(entries_.size());
  list.scores.reserve(entries_.size());
  for (const Entry& e : entries_) {
    list.items.push_back(e.id);
    list.scores.push_back(e.score);
  }
  entries_.clear();
  return list;
}

RankedList top_k_unstructured(const StageParams& stage, const Query& q, uint32_t k) {
  const uint32_t D = stage.V.cols();
  check_k(k, D);
  const std::vector<double> u = query_embedding(stage, q);
  TopKHeap heap(k);
  for (uint32_t d = 0; d < D; ++d) {
    heap.offer(score_item_given_embedding(stage, u, d), d);
  }
  return heap.take_sorted();
}

RankedList infer_greedy(const StageParams& stage, const Query& q, uint32_t k,
                        const PositionWeights& w) {
  const uint32_t D = stage.V.cols();
  const uint32_t n = stage.V.rows();
  check_k(k, D);
  const std::vector<double> u = query_embedding(stage, q);

  // Per-item base scores and self-similarities are position independent.
  std::vector<double> base(D), self(D);
  for (uint32_t d = 0; d < D; ++d) {
    base[d] = score_item_given_embedding(stage, u, d);
    self[d] = squared_norm(stage.S.col(d));
  }

  RankedList list;
  std::vector<char> used(D, 0);
  std::vector<double> context(n, 0.0);
  for (uint32_t pos = 1; pos <= k; ++pos) {
    const double wp = w.weight(pos);
    double best_gain = 0.0;
    uint32_t best_item = D;
    for (uint32_t d = 0; d < D; ++d) {
      if (used[d]) continue;
      const double gain = wp * base[d] +
                          wp * dot(std::span<const double>(context), stage.S.col(d)) +
                          wp * wp * self[d];
      if (best_item == D || TopKHeap::better(gain, d, best_gain, best_item)) {
        best_gain = gain;
        best_item = d;
      }
    }
    used[best_item] = 1;
    list.items.push_back(best_item);
    list.scores.push_back(best_gain);
    auto s_col = stage.S.col(best_item);
    for (uint32_t r = 0; r < n; ++r) context[r] += wp * s_col[r];
  }
  return list;
}

namespace {

struct BeamState {
  std::vector<uint32_t> items;
  std::vector<double> gains;
  double cum_gain = 0.0;
  std::vector<double> context;
};

struct Expansion {
  double priority;  // parent cumulative gain + extension gain
  double gain;
  uint32_t parent;
  uint32_t candidate;
};

}  // namespace

RankedList infer_beam(const StageParams& stage, const Query& q, uint32_t k,
                      uint32_t beam_width, const PositionWeights& w) {
  const uint32_t D = stage.V.cols();
  const uint32_t n = stage.V.rows();
  check_k(k, D);
  if (beam_width < 1) throw ConfigError("beam width must be >= 1");
  const std::vector<double> u = query_embedding(stage, q);

  std::vector<double> base(D), self(D);
  for (uint32_t d = 0; d < D; ++d) {
    base[d] = score_item_given_embedding(stage, u, d);
    self[d] = squared_norm(stage.S.col(d));
  }

  std::vector<BeamState> beam(1);
  beam[0].context.assign(n, 0.0);

  std::vector<Expansion> pool;
  for (uint32_t pos = 1; pos <= k; ++pos) {
    const double wp = w.weight(pos);
    pool.clear();
    for (uint32_t s = 0; s < beam.size(); ++s) {
      const BeamState& state = beam[s];
      for (uint32_t d = 0; d < D; ++d) {
        if (std::find(state.items.begin(), state.items.end(), d) != state.items.end()) {
          continue;
        }
        const double gain =
            wp * base[d] +
            wp * dot(std::span<const double>(state.context), stage.S.col(d)) +
            wp * wp * self[d];
        pool.push_back({state.cum_gain + gain, gain, s, d});
      }
    }
    // Priority order; equal priorities fall back to the raw extension gain so
    // that a width-1 beam makes exactly the greedy choice, then to the item
    // sequence for full determinism.
    auto lex_before = [&](const Expansion& a, const Expansion& b) {
      const std::vector<uint32_t>& pa = beam[a.parent].items;
      const std::vector<uint32_t>& pb = beam[b.parent].items;
      for (size_t i = 0; i < pa.size(); ++i) {
        if (pa[i] != pb[i]) return pa[i] < pb[i];
      }
      return a.candidate < b.candidate;
    };
    auto before = [&](const Expansion& a, const Expansion& b) {
      if (a.priority != b.priority) return a.priority > b.priority;
      if (a.gain != b.gain) return a.gain > b.gain;
      return lex_before(a, b);
    };
    const size_t keep = std::min<size_t>(beam_width, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + keep, pool.end(), before);

    std::vector<BeamState> next;
    next.reserve(keep);
    for (size_t i = 0; i < keep; ++i) {
      const Expansion& e = pool[i];
      BeamState child = beam[e.parent];
      child.items.push_back(e.candidate);
      child.gains.push_back(e.gain);
      child.cum_gain = e.priority;
      auto s_col = stage.S.col(e.candidate);
      for (uint32_t r = 0; r < n; ++r) child.context[r] += wp * s_col[r];
      next.push_back(std::move(child));
    }
    beam = std::move(next);
  }

  // The surviving complete prefixes are re-scored with the full structured
  // objective; cumulative gains only steer the search.
  size_t winner = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (size_t s = 0; s < beam.size(); ++s) {
    RankedList candidate{beam[s].items, beam[s].gains};
    const double score = score_structured_list(stage, q, candidate, w);
    const bool tie_break = score == best && beam[s].items < beam[winner].items;
    if (score > best || tie_break) {
      best = score;
      winner = s;
    }
  }
  return RankedList{std::move(beam[winner].items), std::move(beam[winner].gains)};
}

IterativeResult infer_iterative(const Model& model, const Query& q,
                                const InferenceConfig& config) {
  if (config.stages_to_run >= model.stages.size()) {
    throw ConfigError("requested cascade iteration " + std::to_string(config.stages_to_run) +
                      " but model has stages 0.." + std::to_string(model.max_stage()));
  }
  const uint32_t k = config.k;
  check_k(k, model.D_items);
  const PositionWeights w = position_weights(k, model.weight_scheme);

  IterativeResult result;
  result.per_stage.push_back(top_k_unstructured(model.stages[0], q, k));
  for (uint32_t t = 1; t <= config.stages_to_run; ++t) {
    const StageParams& stage = model.stages[t];
    const RankedList& prev = result.per_stage.back();
    const std::vector<double> u = query_embedding(stage, q);
    const std::vector<double> c = context_vector(stage, prev, w);
    TopKHeap heap(k);
    for (uint32_t d = 0; d < model.D_items; ++d) {
      const double score =
          context_score(stage, score_item_given_embedding(stage, u, d), c, d);
      heap.offer(score, d);
    }
    result.per_stage.push_back(heap.take_sorted());
  }
  return result;
}

namespace {

struct ExhaustiveSearch {
  const StageParams& stage;
  const PositionWeights& w;
  uint32_t D;
  uint32_t k;
  std::vector<double> base;
  std::vector<char> used;
  std::vector<uint32_t> current;
  std::vector<uint32_t> best_items;
  double best_score = -std::numeric_limits<double>::infinity();

  // Enumerates prefixes in lexicographic order with an incrementally
  // maintained vanilla sum and context accumulator; strict improvement keeps
  // the lexicographically smallest optimum.
  void recurse(double vanilla, std::vector<double>& context) {
    const uint32_t pos = static_cast<uint32_t>(current.size()) + 1;
    const double wp = w.weight(pos);
    for (uint32_t d = 0; d < D; ++d) {
      if (used[d]) continue;
      const double next_vanilla = vanilla + wp * base[d];
      auto s_col = stage.S.col(d);
      std::vector<double> next_context = context;
      for (uint32_t r = 0; r < next_context.size(); ++r) {
        next_context[r] += wp * s_col[r];
      }
      current.push_back(d);
      used[d] = 1;
      if (current.size() == k) {
        const double score =
            next_vanilla + squared_norm(std::span<const double>(next_context));
        if (score > best_score) {
          best_score = score;
          best_items = current;
        }
      } else {
        recurse(next_vanilla, next_context);
      }
      used[d] = 0;
      current.pop_back();
    }
  }
};

}  // namespace

RankedList infer_exhaustive(const StageParams& stage, const Query& q, uint32_t k,
                            const PositionWeights& w) {
  const uint32_t D = stage.V.cols();
  check_k(k, D);
  double prefix_count = 1.0;
  for (uint32_t i = 0; i < k; ++i) prefix_count *= static_cast<double>(D - i);
  if (prefix_count > 1e6) {
    throw ConfigError("exhaustive inference guard: " + std::to_string(prefix_count) +
                      " ordered prefixes exceeds 1e6");
  }

  const std::vector<double> u = query_embedding(stage, q);
  ExhaustiveSearch search{stage, w, D, k};
  search.base.resize(D);
  for (uint32_t d = 0; d < D; ++d) {
    search.base[d] = score_item_given_embedding(stage, u, d);
  }
  search.used.assign(D, 0);
  std::vector<double> context(stage.S.rows(), 0.0);
  search.recurse(0.0, context);

  // Report per-position extension gains for the winning prefix.
  RankedList list;
  RankedList prefix;
  for (uint32_t pos = 1; pos <= k; ++pos) {
    const uint32_t d = search.best_items[pos - 1];
    const std::vector<double> c = context_vector(stage, prefix, w);
    const double gain = extension_score(stage, search.base[d], c, d, w.weight(pos));
    list.items.push_back(d);
    list.scores.push_back(gain);
    prefix.items.push_back(d);
    prefix.scores.push_back(gain);
  }
  return list;
}

}  // namespace lasr
