#pragma once

#include <cstdint>
#include <vector>

#include "lasr/model.hpp"

namespace lasr {

// Sparse query vector over the D_q input dimensions. One-hot in the
// recommendation task, general sparse features otherwise.
struct Query {
  std::vector<uint32_t> idx;
  std::vector<float> val;

  static Query one_hot(uint32_t index) { return Query{{index}, {1.0f}}; }
  size_t nnz() const { return idx.size(); }
};

// Ordered permutation prefix: item ids plus a parallel score column. Scores
// are non-increasing when the list comes from sort-based inference; for the
// structured searches they hold each position's extension score.
struct RankedList {
  std::vector<uint32_t> items;
  std::vector<double> scores;

  size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  bool contains(uint32_t item) const;

  bool operator==(const RankedList&) const = default;
};

// Latent query representation u = U q, accumulated in double.
std::vector<double> query_embedding(const StageParams& stage, const Query& q);

// Base scorer: (U q) . (V column d).
double score_query_item(const StageParams& stage, const Query& q, uint32_t d);

// Same dot product with u precomputed; the per-item hot path.
inline double score_item_given_embedding(const StageParams& stage,
                                         std::span<const double> u, uint32_t d) {
  return dot(u, stage.V.col(d));
}

// Weighted context accumulator c = sum_j w_j * S column(list[j]).
std::vector<double> context_vector(const StageParams& stage, const RankedList& context,
                                   const PositionWeights& w);

// Position-weighted sum of base scores over a list.
double score_vanilla_list(const StageParams& stage, const Query& q,
                          const RankedList& list, const PositionWeights& w);

// Vanilla term plus the structure term sum_{i,j} w_i w_j (S d_i).(S d_j),
// diagonal included, computed as ||sum_i w_i S d_i||^2.
double score_structured_list(const StageParams& stage, const Query& q,
                             const RankedList& list, const PositionWeights& w);

// Gain of placing `candidate` at position N = |prefix|+1:
//   w_N f(q,candidate) + sum_{i=1..N} w_i w_N (S d_i).(S candidate)
// with the i = N term being the candidate's self-similarity.
double score_greedy_extension(const StageParams& stage, const Query& q,
                              uint32_t candidate, const RankedList& prefix,
                              uint32_t position, const PositionWeights& w);

// Context-conditioned per-item score against a frozen previous-stage list:
//   f(q,d) + sum_j w_j (S d).(S context_j).
// The candidate is scored against the frozen context even if it appears in it.
double score_item_in_context(const StageParams& stage, const Query& q, uint32_t d,
                             const RankedList& context, const PositionWeights& w);

// Hot-path variants with the query embedding and context vector precomputed.
double extension_score(const StageParams& stage, double base_score,
                       std::span<const double> prefix_context, uint32_t candidate,
                       double w_position);
inline double context_score(const StageParams& stage, double base_score,
                            std::span<const double> context, uint32_t d) {
  return base_score + dot(context, stage.S.col(d));
}

}  // namespace lasr
