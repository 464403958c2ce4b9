#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace lasr {

// Dense float32 matrix with column-major storage, so that each column (one
// embedding vector) is contiguous. Score accumulation happens in double at
// the call sites; only the parameters themselves are 32-bit.
class Matrix {
 public:
  Matrix() = default;
  Matrix(uint32_t rows, uint32_t cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0f) {}

  uint32_t rows() const { return rows_; }
  uint32_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  float& operator()(uint32_t r, uint32_t c) {
    return data_[static_cast<size_t>(c) * rows_ + r];
  }
  float operator()(uint32_t r, uint32_t c) const {
    return data_[static_cast<size_t>(c) * rows_ + r];
  }

  std::span<float> col(uint32_t c) {
    return {data_.data() + static_cast<size_t>(c) * rows_, rows_};
  }
  std::span<const float> col(uint32_t c) const {
    return {data_.data() + static_cast<size_t>(c) * rows_, rows_};
  }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  void set_zero() { std::fill(data_.begin(), data_.end(), 0.0f); }

  bool operator==(const Matrix& other) const = default;

 private:
  uint32_t rows_ = 0;
  uint32_t cols_ = 0;
  std::vector<float> data_;
};

// dot(a, b) over one column and a double-precision accumulator vector.
inline double dot(std::span<const double> a, std::span<const float> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * static_cast<double>(b[i]);
  return acc;
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return acc;
}

inline double squared_norm(std::span<const double> a) {
  double acc = 0.0;
  for (double x : a) acc += x * x;
  return acc;
}

inline double squared_norm(std::span<const float> a) {
  double acc = 0.0;
  for (float x : a) acc += static_cast<double>(x) * static_cast<double>(x);
  return acc;
}

}  // namespace lasr
