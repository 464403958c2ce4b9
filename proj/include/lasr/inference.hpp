#pragma once

#include <cstdint>
#include <vector>

#include "lasr/model.hpp"
#include "lasr/scoring.hpp"

namespace lasr {

enum class Strategy : uint8_t { kUnstructured, kGreedy, kBeam, kIterative };

struct InferenceConfig {
  uint32_t k = 20;
  Strategy strategy = Strategy::kIterative;
  uint32_t beam_width = 1;
  uint32_t stages_to_run = 0;  // final cascade iteration t to produce
};

// Bounded min-heap over (score, item id) keeping the k best entries under
// the order (score desc, id asc). O(D log k); no full sort.
class TopKHeap {
 public:
  explicit TopKHeap(uint32_t k) : k_(k) { entries_.reserve(k + 1); }

  void offer(double score, uint32_t id);
  RankedList take_sorted();

  static bool better(double score_a, uint32_t id_a, double score_b, uint32_t id_b) {
    if (score_a != score_b) return score_a > score_b;
    return id_a < id_b;
  }

 private:
  struct Entry {
    double score;
    uint32_t id;
  };
  uint32_t k_;
  std::vector<Entry> entries_;
};

// The k items with largest base score, ties broken by ascending id.
RankedList top_k_unstructured(const StageParams& stage, const Query& q, uint32_t k);

// Greedy structured search: each position takes the candidate with the best
// extension score given the fixed prefix. Scores column holds the gains.
RankedList infer_greedy(const StageParams& stage, const Query& q, uint32_t k,
                        const PositionWeights& w);

// Beam search over prefixes ranked by cumulative extension gain; the final
// beam is re-scored with the full structured objective and the best complete
// prefix wins. beam_width 1 reproduces infer_greedy exactly.
RankedList infer_beam(const StageParams& stage, const Query& q, uint32_t k,
                      uint32_t beam_width, const PositionWeights& w);

struct IterativeResult {
  // per_stage[t] is the ranked list after cascade iteration t.
  std::vector<RankedList> per_stage;

  const RankedList& final_list() const { return per_stage.back(); }
};

// Cascade inference: iteration 0 ranks by base scores with stage 0; each
// later iteration t ranks every item by its context score against the
// previous iteration's list, using stage t parameters.
IterativeResult infer_iterative(const Model& model, const Query& q,
                                const InferenceConfig& config);

// Full enumeration of every ordered k-prefix under the structured objective.
// Test oracle; guarded to at most 10^6 prefixes. Ties resolve to the
// lexicographically smallest item sequence.
RankedList infer_exhaustive(const StageParams& stage, const Query& q, uint32_t k,
                            const PositionWeights& w);

}  // namespace lasr
