#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <vector>

#include "lasr/data.hpp"
#include "lasr/inference.hpp"
#include "lasr/model.hpp"

namespace lasr {

struct EvalReport {
  std::map<uint32_t, double> recall_at;
  std::map<uint32_t, double> precision_at;  // recall@k / k in the single-positive setting
  double map_score = 0.0;                   // mean of 1/rank
  double mean_rank = 0.0;
  size_t pairs_evaluated = 0;
  size_t pairs_skipped_oov = 0;
};

// 1-based position of d_pos in the full ranking the strategy induces over all
// items. Sorted strategies rank by their scores directly; for greedy and beam
// the produced list occupies positions 1..k and every remaining item is
// ordered by its context score against that list. Ties go to the lower id.
uint32_t rank_of_positive(const Model& model, const Query& q, uint32_t d_pos,
                          const InferenceConfig& config);

// Ranks every test pair and aggregates recall@k for each cutoff in ks,
// precision@k = recall@k / k, MAP and mean rank. `skipped_oov` is the number
// of raw pairs dropped before index mapping; it is carried into the report.
EvalReport evaluate(const Model& model, const PairSet& test,
                    const std::vector<uint32_t>& ks, const InferenceConfig& config,
                    size_t skipped_oov = 0);

// key=value lines / JSON document with keys recall@<k>, map, mean_rank,
// evaluated, skipped_oov.
void write_report_text(const EvalReport& report, std::ostream& out);
void write_report_json(const EvalReport& report, std::ostream& out);

}  // namespace lasr
