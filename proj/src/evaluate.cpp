#include "lasr/evaluate.hpp"

#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "lasr/error.hpp"

namespace lasr {

namespace {

// 1 + number of items strictly ahead of the positive under (score desc,
// id asc), over a scorer covering all items.
template <typename ScoreFn>
uint32_t rank_by_scores(uint32_t D_items, uint32_t d_pos, double pos_score,
                        const ScoreFn& score) {
  uint32_t ahead = 0;
  for (uint32_t d = 0; d < D_items; ++d) {
    if (d == d_pos) continue;
    if (TopKHeap::better(score(d), d, pos_score, d_pos)) ++ahead;
  }
  return ahead + 1;
}

}  // namespace

uint32_t rank_of_positive(const Model& model, const Query& q, uint32_t d_pos,
                          const InferenceConfig& config) {
  if (d_pos >= model.D_items) {
    throw std::out_of_range("positive item id " + std::to_string(d_pos) +
                            " out of range for D_items=" + std::to_string(model.D_items));
  }
  if (config.stages_to_run >= model.stages.size()) {
    throw ConfigError("requested cascade iteration " + std::to_string(config.stages_to_run) +
                      " but model has stages 0.." + std::to_string(model.max_stage()));
  }
  const PositionWeights w = position_weights(config.k, model.weight_scheme);

  switch (config.strategy) {
    case Strategy::kUnstructured: {
      const StageParams& stage = model.stages.front();
      const std::vector<double> u = query_embedding(stage, q);
      const auto score = [&](uint32_t d) { return dot(u, stage.V.col(d)); };
      return rank_by_scores(model.D_items, d_pos, score(d_pos), score);
    }
    case Strategy::kIterative: {
      const uint32_t t = config.stages_to_run;
      const StageParams& stage = model.stages[t];
      const std::vector<double> u = query_embedding(stage, q);
      if (t == 0) {
        const auto score = [&](uint32_t d) { return dot(u, stage.V.col(d)); };
        return rank_by_scores(model.D_items, d_pos, score(d_pos), score);
      }
      InferenceConfig sub = config;
      sub.stages_to_run = t - 1;
      const RankedList context = infer_iterative(model, q, sub).final_list();
      const std::vector<double> c = context_vector(stage, context, w);
      const auto score = [&](uint32_t d) {
        return context_score(stage, dot(u, stage.V.col(d)), c, d);
      };
      return rank_by_scores(model.D_items, d_pos, score(d_pos), score);
    }
    case Strategy::kGreedy:
    case Strategy::kBeam: {
      const StageParams& stage = model.stages[config.stages_to_run];
      const RankedList list =
          config.strategy == Strategy::kGreedy
              ? infer_greedy(stage, q, config.k, w)
              : infer_beam(stage, q, config.k, config.beam_width, w);
      for (size_t i = 0; i < list.size(); ++i) {
        if (list.items[i] == d_pos) return static_cast<uint32_t>(i) + 1;
      }
      // Remaining items are ordered by their score against the produced list.
      const std::vector<double> u = query_embedding(stage, q);
      const std::vector<double> c = context_vector(stage, list, w);
      const auto score = [&](uint32_t d) {
        return context_score(stage, dot(u, stage.V.col(d)), c, d);
      };
      const double pos_score = score(d_pos);
      uint32_t ahead = 0;
      for (uint32_t d = 0; d < model.D_items; ++d) {
        if (d == d_pos || list.contains(d)) continue;
        if (TopKHeap::better(score(d), d, pos_score, d_pos)) ++ahead;
      }
      return static_cast<uint32_t>(list.size()) + ahead + 1;
    }
  }
  throw ConfigError("unknown inference strategy");
}

EvalReport evaluate(const Model& model, const PairSet& test,
                    const std::vector<uint32_t>& ks, const InferenceConfig& config,
                    size_t skipped_oov) {
  if (test.pairs.empty()) {
    if (skipped_oov > 0) {
      throw DataError("all " + std::to_string(skipped_oov) +
                      " test pairs are out of vocabulary");
    }
    throw ConfigError("test set is empty");
  }
  EvalReport report;
  report.pairs_skipped_oov = skipped_oov;
  report.pairs_evaluated = test.pairs.size();
  std::map<uint32_t, size_t> hits;
  for (uint32_t k : ks) {
    if (k == 0) throw ConfigError("recall cutoff must be positive");
    hits[k] = 0;
  }
  double sum_rank = 0.0;
  double sum_reciprocal = 0.0;
  for (const auto& [qi, di] : test.pairs) {
    const uint32_t rank = rank_of_positive(model, Query::one_hot(qi), di, config);
    sum_rank += rank;
    sum_reciprocal += 1.0 / rank;
    for (auto& [k, count] : hits) {
      if (rank <= k) ++count;
    }
  }
  const double N = static_cast<double>(test.pairs.size());
  for (const auto& [k, count] : hits) {
    const double recall = static_cast<double>(count) / N;
    report.recall_at[k] = recall;
    report.precision_at[k] = recall / static_cast<double>(k);
  }
  report.map_score = sum_reciprocal / N;
  report.mean_rank = sum_rank / N;
  return report;
}

void write_report_text(const EvalReport& report, std::ostream& out) {
  char buf[64];
  for (const auto& [k, recall] : report.recall_at) {
    std::snprintf(buf, sizeof(buf), "recall@%u=%.6f", k, recall);
    out << buf << '\n';
  }
  std::snprintf(buf, sizeof(buf), "map=%.6f", report.map_score);
  out << buf << '\n';
  std::snprintf(buf, sizeof(buf), "mean_rank=%.6f", report.mean_rank);
  out << buf << '\n';
  out << "evaluated=" << report.pairs_evaluated << '\n';
  out << "skipped_oov=" << report.pairs_skipped_oov << '\n';
}

void write_report_json(const EvalReport& report, std::ostream& out) {
  nlohmann::ordered_json doc;
  for (const auto& [k, recall] : report.recall_at) {
    doc["recall@" + std::to_string(k)] = recall;
  }
  doc["map"] = report.map_score;
  doc["mean_rank"] = report.mean_rank;
  doc["evaluated"] = report.pairs_evaluated;
  doc["skipped_oov"] = report.pairs_skipped_oov;
  out << doc.dump(2) << '\n';
}

}  // namespace lasr
