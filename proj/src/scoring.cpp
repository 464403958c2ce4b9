#include "lasr/scoring.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "lasr/error.hpp"

namespace lasr {

bool RankedList::contains(uint32_t item) const {
  return std::find(items.begin(), items.end(), item) != items.end();
}

std::vector<double> query_embedding(const StageParams& stage, const Query& q) {
  std::vector<double> u(stage.U.rows(), 0.0);
  for (size_t t = 0; t < q.idx.size(); ++t) {
    const uint32_t j = q.idx[t];
    if (j >= stage.U.cols()) {
      throw std::out_of_range("query feature index " + std::to_string(j) +
                              " out of range for D_q=" + std::to_string(stage.U.cols()));
    }
    const double qj = q.val[t];
    auto column = stage.U.col(j);
    for (uint32_t r = 0; r < stage.U.rows(); ++r) u[r] += qj * column[r];
  }
  return u;
}

double score_query_item(const StageParams& stage, const Query& q, uint32_t d) {
  if (d >= stage.V.cols()) {
    throw std::out_of_range("item id " + std::to_string(d) +
                            " out of range for D_items=" + std::to_string(stage.V.cols()));
  }
  const std::vector<double> u = query_embedding(stage, q);
  return dot(std::span<const double>(u), stage.V.col(d));
}

std::vector<double> context_vector(const StageParams& stage, const RankedList& context,
                                   const PositionWeights& w) {
  std::vector<double> c(stage.S.rows(), 0.0);
  for (size_t j = 0; j < context.size(); ++j) {
    const double wj = w.weight(static_cast<uint32_t>(j + 1));
    if (wj == 0.0) continue;
    auto column = stage.S.col(context.items[j]);
    for (uint32_t r = 0; r < stage.S.rows(); ++r) c[r] += wj * column[r];
  }
  return c;
}

double score_vanilla_list(const StageParams& stage, const Query& q,
                          const RankedList& list, const PositionWeights& w) {
  if (list.empty()) throw std::invalid_argument("cannot score an empty list");
  const std::vector<double> u = query_embedding(stage, q);
  double total = 0.0;
  for (size_t i = 0; i < list.size(); ++i) {
    const double wi = w.weight(static_cast<uint32_t>(i + 1));
    if (wi == 0.0) continue;
    total += wi * dot(std::span<const double>(u), stage.V.col(list.items[i]));
  }
  return total;
}

double score_structured_list(const StageParams& stage, const Query& q,
                             const RankedList& list, const PositionWeights& w) {
  const double vanilla = score_vanilla_list(stage, q, list, w);
  const std::vector<double> m = context_vector(stage, list, w);
  return vanilla + squared_norm(std::span<const double>(m));
}

double extension_score(const StageParams& stage, double base_score,
                       std::span<const double> prefix_context, uint32_t candidate,
                       double w_position) {
  auto s_cand = stage.S.col(candidate);
  const double cross = dot(prefix_context, s_cand);
  const double self = squared_norm(s_cand);
  return w_position * base_score + w_position * cross + w_position * w_position * self;
}

double score_greedy_extension(const StageParams& stage, const Query& q,
                              uint32_t candidate, const RankedList& prefix,
                              uint32_t position, const PositionWeights& w) {
  if (position != prefix.size() + 1) {
    throw std::invalid_argument("extension position must be |prefix|+1");
  }
  if (prefix.contains(candidate)) {
    throw std::invalid_argument("candidate already in prefix");
  }
  const double base = score_query_item(stage, q, candidate);
  const std::vector<double> c = context_vector(stage, prefix, w);
  return extension_score(stage, base, c, candidate, w.weight(position));
}

double score_item_in_context(const StageParams& stage, const Query& q, uint32_t d,
                             const RankedList& context, const PositionWeights& w) {
  if (context.empty()) {
    throw std::invalid_argument("context must be nonempty; use the base scorer at stage 0");
  }
  const double base = score_query_item(stage, q, d);
  const std::vector<double> c = context_vector(stage, context, w);
  return context_score(stage, base, c, d);
}

}  // namespace lasr
