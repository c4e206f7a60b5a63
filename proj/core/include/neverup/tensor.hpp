#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neverup/rng.hpp"

namespace neverup {

using Shape = std::vector<int>;

// Dense row-major float32 tensor. Rank 1 or 2 everywhere in this codebase;
// shape {r, c} with r = batch rows. Scalars are shape {1}.
struct Tensor {
  Shape shape;
  std::vector<float> v;

  Tensor() = default;
  Tensor(Shape s, std::vector<float> data) : shape(std::move(s)), v(std::move(data)) {}

  static Tensor zeros(const Shape& s);
  static Tensor full(const Shape& s, float value);
  static Tensor scalar(float value) { return Tensor({1}, {value}); }
  // Uniform in [-bound, bound].
  static Tensor uniform(const Shape& s, float bound, Rng& rng);

  int size() const { return static_cast<int>(v.size()); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  float& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }
  float at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols() + c]; }
  float* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols(); }
  const float* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  void fill(float value) { std::fill(v.begin(), v.end(), value); }
};

int shape_size(const Shape& s);
std::string shape_str(const Shape& s);

// Batch of categorical observations: `cells` slots per row, each holding a
// category in [0, channels). Equivalent to a dense one-hot of width
// cells*channels, stored compactly; the substrate consumes it directly.
struct CatBatch {
  int cells = 0;
  int channels = 0;
  std::vector<std::uint8_t> cat;  // rows * cells

  int rows() const { return cells == 0 ? 0 : static_cast<int>(cat.size()) / cells; }
  int dense_dim() const { return cells * channels; }
  const std::uint8_t* row(int r) const { return cat.data() + static_cast<std::size_t>(r) * cells; }

  static CatBatch from_row(int cells, int channels, const std::uint8_t* data);
  void append_row(const std::uint8_t* data);
  // Materialize the one-hot encoding (used by tests and dense-input layers).
  Tensor to_dense() const;
};

}  // namespace neverup
