#include "lasr/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "lasr/error.hpp"
#include "lasr/rng.hpp"

namespace lasr {

PositionWeights::PositionWeights(uint32_t k, WeightScheme scheme)
    : k_(k), scheme_(scheme) {
  if (k < 1) throw ConfigError("position weights need k >= 1, got " + std::to_string(k));
  nonzeros_.resize(k);
  for (uint32_t i = 0; i < k; ++i) nonzeros_[i] = 1.0 / (i + 1);
}

PositionWeights position_weights(uint32_t k, WeightScheme scheme) {
  return PositionWeights(k, scheme);
}

StageParams init_stage(uint32_t n, uint32_t D_q, uint32_t D_items, uint64_t seed) {
  if (n < 1 || D_q < 1 || D_items < 1) {
    throw ConfigError("stage dimensions must be positive, got n=" + std::to_string(n) +
                      " D_q=" + std::to_string(D_q) +
                      " D_items=" + std::to_string(D_items));
  }
  StageParams stage;
  stage.U = Matrix(n, D_q);
  stage.V = Matrix(n, D_items);
  stage.S = Matrix(n, D_items);
  Rng rng(seed);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(n));
  for (Matrix* m : {&stage.U, &stage.V, &stage.S}) {
    float* p = m->data();
    for (size_t i = 0; i < m->size(); ++i) {
      p[i] = static_cast<float>(rng.normal() * stddev);
    }
  }
  return stage;
}

void project_column(Matrix& m, uint32_t c, double C) {
  auto column = m.col(c);
  const double norm = std::sqrt(squared_norm(std::span<const float>(column)));
  if (norm > C) {
    const double scale = C / norm;
    for (float& x : column) x = static_cast<float>(x * scale);
  }
}

void project_columns(Matrix& m, double C) {
  if (C <= 0.0) throw ConfigError("norm bound C must be positive");
  for (uint32_t c = 0; c < m.cols(); ++c) project_column(m, c, C);
}

double max_column_norm(const Matrix& m) {
  double best = 0.0;
  for (uint32_t c = 0; c < m.cols(); ++c) {
    best = std::max(best, std::sqrt(squared_norm(m.col(c))));
  }
  return best;
}

bool Model::all_finite() const {
  for (const StageParams& stage : stages) {
    for (const Matrix* m : {&stage.U, &stage.V, &stage.S}) {
      const float* p = m->data();
      for (size_t i = 0; i < m->size(); ++i) {
        if (!std::isfinite(p[i])) return false;
      }
    }
  }
  return true;
}

namespace {

constexpr char kMagic[4] = {'L', 'A', 'S', 'R'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError("truncated model file: " + path);
  }
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_matrix_row_major(std::ostream& out, const Matrix& m) {
  for (uint32_t r = 0; r < m.rows(); ++r) {
    for (uint32_t c = 0; c < m.cols(); ++c) {
      write_u32(out, std::bit_cast<uint32_t>(m(r, c)));
    }
  }
}

void read_matrix_row_major(std::istream& in, Matrix& m, const std::string& path) {
  for (uint32_t r = 0; r < m.rows(); ++r) {
    for (uint32_t c = 0; c < m.cols(); ++c) {
      m(r, c) = std::bit_cast<float>(read_u32(in, path));
    }
  }
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open model file for writing: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(model.stages.size()));
  write_u32(out, model.n);
  write_u32(out, model.D_q);
  write_u32(out, model.D_items);
  write_u32(out, model.k);
  const char scheme = static_cast<char>(model.weight_scheme);
  out.write(&scheme, 1);
  for (const StageParams& stage : model.stages) {
    write_matrix_row_major(out, stage.U);
    write_matrix_row_major(out, stage.V);
    write_matrix_row_major(out, stage.S);
  }
  if (!out) throw IoError("write failed for model file: " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a model file (bad magic): " + path);
  }
  const uint32_t version = read_u32(in, path);
  if (version != kVersion) {
    throw IoError("unsupported model version " + std::to_string(version) + " in " + path);
  }
  Model model;
  const uint32_t stage_count = read_u32(in, path);
  model.n = read_u32(in, path);
  model.D_q = read_u32(in, path);
  model.D_items = read_u32(in, path);
  model.k = read_u32(in, path);
  char scheme;
  if (!in.read(&scheme, 1)) throw IoError("truncated model file: " + path);
  if (scheme != 0 && scheme != 1) {
    throw IoError("unknown weight scheme in model file: " + path);
  }
  model.weight_scheme = static_cast<WeightScheme>(scheme);
  if (stage_count == 0 || model.n == 0 || model.D_q == 0 || model.D_items == 0 ||
      model.k == 0 || model.k > model.D_items) {
    throw IoError("inconsistent dimensions in model file: " + path);
  }
  model.stages.resize(stage_count);
  for (StageParams& stage : model.stages) {
    stage.U = Matrix(model.n, model.D_q);
    stage.V = Matrix(model.n, model.D_items);
    stage.S = Matrix(model.n, model.D_items);
    read_matrix_row_major(in, stage.U, path);
    read_matrix_row_major(in, stage.V, path);
    read_matrix_row_major(in, stage.S, path);
  }
  // Anything left over means the file does not match its own header.
  in.peek();
  if (!in.eof()) throw IoError("trailing bytes in model file: " + path);
  return model;
}

}  // namespace lasr
