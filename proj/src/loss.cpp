#include "lasr/loss.hpp"

#include <algorithm>
#include <stdexcept>

#include "lasr/error.hpp"

namespace lasr {

double auc_hinge(double f_pos, double f_neg, double margin) {
  return std::max(0.0, margin - f_pos + f_neg);
}

double rank_to_loss(uint32_t r, Loss loss) {
  if (loss == Loss::kAuc) return static_cast<double>(r);
  double h = 0.0;
  for (uint32_t i = 1; i <= r; ++i) h += 1.0 / i;
  return h;
}

ViolationSample sample_violator(const std::function<double(uint32_t)>& scorer,
                                double f_pos, uint32_t positive, uint32_t D_items,
                                double margin, Rng& rng) {
  if (D_items < 2) throw ConfigError("violator sampling needs at least 2 items");
  const uint32_t max_trials = D_items - 1;
  ViolationSample sample;
  double f_neg = 0.0;
  do {
    uint32_t negative;
    do {
      negative = rng.uniform_u32(D_items);
    } while (negative == positive);
    f_neg = scorer(negative);
    sample.negative = negative;
    ++sample.trials;
  } while (f_pos >= f_neg + margin && sample.trials < max_trials);
  sample.violating = f_pos < f_neg + margin;
  return sample;
}

double warp_weight(uint32_t trials, uint32_t D_items, Loss loss) {
  if (trials < 1 || trials > D_items - 1) {
    throw std::invalid_argument("trial count out of range [1, D-1]");
  }
  return rank_to_loss((D_items - 1) / trials, loss);
}

uint32_t margin_rank(std::span<const double> scores, uint32_t positive, double margin) {
  const double f_pos = scores[positive];
  uint32_t rank = 0;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (j == positive) continue;
    if (margin + scores[j] >= f_pos) ++rank;
  }
  return rank;
}

RankLossTable::RankLossTable(uint32_t max_rank, Loss loss) {
  table_.resize(max_rank + 1);
  table_[0] = 0.0;
  for (uint32_t r = 1; r <= max_rank; ++r) {
    table_[r] = table_[r - 1] + (loss == Loss::kAuc ? 1.0 : 1.0 / r);
  }
}

}  // namespace lasr
