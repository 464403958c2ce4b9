#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lasr/matrix.hpp"

namespace lasr {

// Position weights w_i over ranked-list positions. The sparse scheme is the
// default: w_i = 1/i for i <= k and 0 past k. The dense scheme keeps 1/i for
// every position and exists for analysis runs only.
enum class WeightScheme : uint8_t { kSparseHarmonic = 0, kDenseHarmonic = 1 };

enum class Loss : uint8_t { kWarp = 0, kAuc = 1 };

class PositionWeights {
 public:
  PositionWeights(uint32_t k, WeightScheme scheme);

  // 1-based position. Zero past k under the sparse scheme.
  double weight(uint32_t position) const {
    if (position == 0) return 0.0;
    if (position <= k_) return nonzeros_[position - 1];
    return scheme_ == WeightScheme::kDenseHarmonic ? 1.0 / position : 0.0;
  }

  uint32_t k() const { return k_; }
  WeightScheme scheme() const { return scheme_; }
  const std::vector<double>& nonzeros() const { return nonzeros_; }

 private:
  uint32_t k_;
  WeightScheme scheme_;
  std::vector<double> nonzeros_;
};

PositionWeights position_weights(uint32_t k,
                                 WeightScheme scheme = WeightScheme::kSparseHarmonic);

// One cascade stage: query map U (n x D_q), item map V (n x D_items) and the
// structure map S (n x D_items). Stage 0 never reads S during scoring but the
// layout is uniform across stages.
struct StageParams {
  Matrix U;
  Matrix V;
  Matrix S;

  bool operator==(const StageParams&) const = default;
};

struct Model {
  std::vector<StageParams> stages;  // indexed t = 0..T
  uint32_t n = 0;
  uint32_t D_q = 0;
  uint32_t D_items = 0;
  uint32_t k = 0;
  WeightScheme weight_scheme = WeightScheme::kSparseHarmonic;

  uint32_t max_stage() const { return static_cast<uint32_t>(stages.size()) - 1; }
  PositionWeights weights() const { return position_weights(k, weight_scheme); }
  bool all_finite() const;

  bool operator==(const Model&) const = default;
};

struct HyperParams {
  double learning_rate = 0.05;
  double C = 1.0;       // max column norm
  double margin = 1.0;  // fixed by the hinge formulation, exposed but untuned
  Loss loss = Loss::kWarp;
  uint64_t seed = 1;
};

// Entries i.i.d. normal, mean 0, std 1/sqrt(n). Deterministic per seed.
StageParams init_stage(uint32_t n, uint32_t D_q, uint32_t D_items, uint64_t seed);

// Rescales every column with norm > C back to norm exactly C. Idempotent;
// zero and feasible columns pass through untouched.
void project_columns(Matrix& m, double C);
void project_column(Matrix& m, uint32_t c, double C);

double max_column_norm(const Matrix& m);

// Binary model format: magic "LASR", u32 version, u32 stage count, u32 n,
// u32 D_q, u32 D_items, u32 k, u8 weight scheme, then per stage U, V, S as
// row-major little-endian float32. Round-trips bit-exactly.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace lasr
