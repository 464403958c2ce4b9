#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace oracle {

using lasr::PositionWeights;
using lasr::Query;
using lasr::StageParams;

double base_score(const StageParams& stage, const Query& q, uint32_t d) {
  long double sum = 0.0L;
  for (size_t j = 0; j < q.idx.size(); ++j) {
    long double inner = 0.0L;
    for (uint32_t r = 0; r < stage.U.rows(); ++r) {
      inner += static_cast<long double>(stage.U(r, q.idx[j])) * stage.V(r, d);
    }
    sum += static_cast<long double>(q.val[j]) * inner;
  }
  return static_cast<double>(sum);
}

double structure_dot(const StageParams& stage, uint32_t a, uint32_t b) {
  long double sum = 0.0L;
  for (uint32_t r = 0; r < stage.S.rows(); ++r) {
    sum += static_cast<long double>(stage.S(r, a)) * stage.S(r, b);
  }
  return static_cast<double>(sum);
}

double structured_list_score(const StageParams& stage, const Query& q,
                             const std::vector<uint32_t>& items,
                             const PositionWeights& w) {
  long double sum = 0.0L;
  for (size_t i = 0; i < items.size(); ++i) {
    sum += w.weight(static_cast<uint32_t>(i + 1)) * base_score(stage, q, items[i]);
  }
  for (size_t i = 0; i < items.size(); ++i) {
    for (size_t j = 0; j < items.size(); ++j) {
      sum += w.weight(static_cast<uint32_t>(i + 1)) *
             w.weight(static_cast<uint32_t>(j + 1)) *
             structure_dot(stage, items[i], items[j]);
    }
  }
  return static_cast<double>(sum);
}

double extension_gain(const StageParams& stage, const Query& q,
                      const std::vector<uint32_t>& prefix, uint32_t candidate,
                      const PositionWeights& w) {
  const uint32_t position = static_cast<uint32_t>(prefix.size()) + 1;
  const double w_n = w.weight(position);
  long double sum = w_n * base_score(stage, q, candidate);
  for (size_t i = 0; i < prefix.size(); ++i) {
    sum += w.weight(static_cast<uint32_t>(i + 1)) * w_n *
           structure_dot(stage, prefix[i], candidate);
  }
  sum += w_n * w_n * structure_dot(stage, candidate, candidate);
  return static_cast<double>(sum);
}

double context_item_score(const StageParams& stage, const Query& q, uint32_t d,
                          const std::vector<uint32_t>& context,
                          const PositionWeights& w) {
  long double sum = base_score(stage, q, d);
  for (size_t j = 0; j < context.size(); ++j) {
    sum += w.weight(static_cast<uint32_t>(j + 1)) * structure_dot(stage, d, context[j]);
  }
  return static_cast<double>(sum);
}

std::vector<uint32_t> rank_items_desc(const std::vector<double>& scores) {
  std::vector<uint32_t> ids(scores.size());
  std::iota(ids.begin(), ids.end(), 0u);
  std::sort(ids.begin(), ids.end(), [&](uint32_t a, uint32_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return ids;
}

uint32_t rank_of(const std::vector<double>& scores, uint32_t target) {
  uint32_t rank = 1;
  for (uint32_t d = 0; d < scores.size(); ++d) {
    if (d == target) continue;
    if (scores[d] > scores[target] || (scores[d] == scores[target] && d < target)) {
      ++rank;
    }
  }
  return rank;
}

namespace {

void enumerate_prefixes(const StageParams& stage, const Query& q, uint32_t k,
                        const PositionWeights& w, std::vector<uint32_t>& prefix,
                        std::vector<bool>& used, double& best_score,
                        std::vector<uint32_t>& best) {
  if (prefix.size() == k) {
    const double score = structured_list_score(stage, q, prefix, w);
    if (best.empty() || score > best_score) {
      best_score = score;
      best = prefix;
    }
    return;
  }
  for (uint32_t d = 0; d < stage.V.cols(); ++d) {
    if (used[d]) continue;
    used[d] = true;
    prefix.push_back(d);
    enumerate_prefixes(stage, q, k, w, prefix, used, best_score, best);
    prefix.pop_back();
    used[d] = false;
  }
}

}  // namespace

std::vector<uint32_t> best_prefix_bruteforce(const StageParams& stage, const Query& q,
                                             uint32_t k, const PositionWeights& w) {
  std::vector<uint32_t> prefix, best;
  std::vector<bool> used(stage.V.cols(), false);
  double best_score = 0.0;
  enumerate_prefixes(stage, q, k, w, prefix, used, best_score, best);
  return best;
}

double regularized_gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw std::invalid_argument("gamma_p domain");
  if (x == 0.0) return 0.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // series expansion of P
    double ap = a;
    double term = 1.0 / a;
    double sum = term;
    for (int i = 0; i < 1000; ++i) {
      ap += 1.0;
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(log_prefactor);
  }
  // Lentz continued fraction for Q
  double b = x + 1.0 - a;
  double c = 1e300;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return 1.0 - std::exp(log_prefactor) * h;
}

double chi_squared_p_value(double statistic, double dof) {
  return 1.0 - regularized_gamma_p(dof / 2.0, statistic / 2.0);
}

lasr::Query random_sparse_query(uint32_t D_q, lasr::Rng& rng) {
  const uint32_t max_nnz = std::min<uint32_t>(4, D_q);
  const uint32_t nnz = 1 + rng.uniform_u32(max_nnz);
  std::vector<uint32_t> all(D_q);
  std::iota(all.begin(), all.end(), 0u);
  for (uint32_t i = 0; i < nnz; ++i) {
    const uint32_t j = i + rng.uniform_u32(D_q - i);
    std::swap(all[i], all[j]);
  }
  lasr::Query q;
  q.idx.assign(all.begin(), all.begin() + nnz);
  std::sort(q.idx.begin(), q.idx.end());
  for (uint32_t i = 0; i < nnz; ++i) q.val.push_back(static_cast<float>(rng.normal()));
  return q;
}

}  // namespace oracle
