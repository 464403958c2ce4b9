#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>

#include "lasr/model.hpp"
#include "lasr/rng.hpp"

namespace lasr {

// Pairwise margin violation cost: max(0, margin - f_pos + f_neg).
double auc_hinge(double f_pos, double f_neg, double margin);

// Rank-to-loss transform L(r) = sum_{i=1..r} alpha_i with alpha_i = 1/i for
// WARP (harmonic number) and alpha_i = 1 for AUC (identity).
double rank_to_loss(uint32_t r, Loss loss);

// Outcome of the negative-sampling loop: the last negative drawn, the number
// of trials, and whether that final draw actually violates the margin.
struct ViolationSample {
  std::optional<uint32_t> negative;
  uint32_t trials = 0;
  bool violating = false;
};

// Draws uniform negatives (with replacement, never the positive) until one
// violates the margin or D_items - 1 trials elapse.
ViolationSample sample_violator(const std::function<double(uint32_t)>& scorer,
                                double f_pos, uint32_t positive, uint32_t D_items,
                                double margin, Rng& rng);

// Sampled-rank loss weight L(floor((D-1)/N)) applied to the gradient step.
double warp_weight(uint32_t trials, uint32_t D_items, Loss loss);

// Exact margin-based rank of the positive: the number of other items scoring
// within the margin of (or above) it. Evaluation/oracle path only; training
// uses the sampled estimate.
uint32_t margin_rank(std::span<const double> scores, uint32_t positive, double margin);

// Precomputed L(r) table for the training hot path.
class RankLossTable {
 public:
  RankLossTable(uint32_t max_rank, Loss loss);
  double operator()(uint32_t r) const { return table_[r]; }

 private:
  std::vector<double> table_;
};

}  // namespace lasr
