#include "neverup/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "neverup/errors.hpp"

namespace neverup {

int shape_size(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return s.empty() ? 0 : n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(const Shape& s) {
  return Tensor(s, std::vector<float>(static_cast<std::size_t>(shape_size(s)), 0.0f));
}

Tensor Tensor::full(const Shape& s, float value) {
  return Tensor(s, std::vector<float>(static_cast<std::size_t>(shape_size(s)), value));
}

Tensor Tensor::uniform(const Shape& s, float bound, Rng& rng) {
  Tensor t = zeros(s);
  for (auto& x : t.v) x = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

bool Tensor::all_finite() const {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

CatBatch CatBatch::from_row(int cells, int channels, const std::uint8_t* data) {
  CatBatch b;
  b.cells = cells;
  b.channels = channels;
  b.cat.assign(data, data + cells);
  return b;
}

void CatBatch::append_row(const std::uint8_t* data) {
  cat.insert(cat.end(), data, data + cells);
}

Tensor CatBatch::to_dense() const {
  const int r = rows();
  Tensor out = Tensor::zeros({r, dense_dim()});
  for (int i = 0; i < r; ++i) {
    const std::uint8_t* src = row(i);
    for (int c = 0; c < cells; ++c) {
      if (src[c] >= channels)
        throw DataError("CatBatch: category out of range at cell " + std::to_string(c));
      out.at(i, c * channels + src[c]) = 1.0f;
    }
  }
  return out;
}

}  // namespace neverup
