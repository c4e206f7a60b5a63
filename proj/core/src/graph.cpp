#include "neverup/graph.hpp"

#include <Eigen/Core>
#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {
namespace {

using MatRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

MapC cmap(const Tensor& t) { return MapC(t.v.data(), t.rows(), t.cols()); }
MapM mmap(Tensor& t) { return MapM(t.v.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
  throw ConfigError(std::string(op) + ": incompatible shapes " + shape_str(a.shape) +
                    " vs " + shape_str(b.shape));
}

}  // namespace

int Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Graph::Node& Graph::at(int id) {
  if (id < 0 || id >= static_cast<int>(nodes_.size()))
    throw UsageError("Graph: node id " + std::to_string(id) + " out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

const Graph::Node& Graph::at(int id) const {
  return const_cast<Graph*>(this)->at(id);
}

const Tensor& Graph::value(int id) const {
  const Node& n = at(id);
  return n.op == Op::kParam ? *n.param : n.val;
}

int Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.val = std::move(value);
  return push(std::move(n));
}

int Graph::param(Tensor* p) {
  auto it = param_ids_.find(p);
  if (it != param_ids_.end()) return it->second;
  Node n;
  n.op = Op::kParam;
  n.param = p;
  n.needs_grad = true;
  int id = push(std::move(n));
  param_ids_.emplace(p, id);
  return id;
}

int Graph::matmul(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (ta.cols() != tb.rows()) shape_fail("matmul", ta, tb);
  Node n;
  n.op = Op::kMatMul;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.val = Tensor::zeros({ta.rows(), tb.cols()});
  mmap(n.val).noalias() = cmap(ta) * cmap(tb);
  return push(std::move(n));
}

int Graph::onehot_matmul(int w, const CatBatch& input) {
  const Tensor& tw = value(w);
  if (tw.rows() != input.dense_dim())
    throw ConfigError("onehot_matmul: weight rows " + std::to_string(tw.rows()) +
                      " != one-hot dim " + std::to_string(input.dense_dim()));
  const int rows = input.rows();
  const int out = tw.cols();
  Node n;
  n.op = Op::kOneHotMatMul;
  n.a = w;
  n.needs_grad = at(w).needs_grad;
  n.cats = input;
  n.val = Tensor::zeros({rows, out});
  for (int r = 0; r < rows; ++r) {
    const std::uint8_t* cat = input.row(r);
    float* dst = &n.val.at(r, 0);
    for (int cell = 0; cell < input.cells; ++cell) {
      const float* src = tw.row(cell * input.channels + cat[cell]);
      for (int j = 0; j < out; ++j) dst[j] += src[j];
    }
  }
  return push(std::move(n));
}

int Graph::add_row(int a, int bias) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(bias);
  if (tb.rows() != 1 || tb.cols() != ta.cols()) shape_fail("add_row", ta, tb);
  Node n;
  n.op = Op::kAddRow;
  n.a = a;
  n.b = bias;
  n.needs_grad = at(a).needs_grad || at(bias).needs_grad;
  n.val = ta;
  mmap(n.val).rowwise() += cmap(tb).row(0);
  return push(std::move(n));
}

int Graph::add(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_fail("add", ta, tb);
  Node n;
  n.op = Op::kAdd;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.val = ta;
  for (int i = 0; i < n.val.size(); ++i) n.val.v[i] += tb.v[i];
  return push(std::move(n));
}

int Graph::sub(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_fail("sub", ta, tb);
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.val = ta;
  for (int i = 0; i < n.val.size(); ++i) n.val.v[i] -= tb.v[i];
  return push(std::move(n));
}

int Graph::mul(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  if (!ta.same_shape(tb)) shape_fail("mul", ta, tb);
  Node n;
  n.op = Op::kMul;
  n.a = a;
  n.b = b;
  n.needs_grad = at(a).needs_grad || at(b).needs_grad;
  n.val = ta;
  for (int i = 0; i < n.val.size(); ++i) n.val.v[i] *= tb.v[i];
  return push(std::move(n));
}

int Graph::scale_add(int a, float k, float c) {
  Node n;
  n.op = Op::kScaleAdd;
  n.a = a;
  n.k = k;
  n.c = c;
  n.needs_grad = at(a).needs_grad;
  n.val = value(a);
  for (auto& x : n.val.v) x = k * x + c;
  return push(std::move(n));
}

int Graph::relu(int a) {
  Node n;
  n.op = Op::kRelu;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.val = value(a);
  for (auto& x : n.val.v) x = x > 0.0f ? x : 0.0f;
  return push(std::move(n));
}

int Graph::tanh_(int a) {
  Node n;
  n.op = Op::kTanh;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.val = value(a);
  for (auto& x : n.val.v) x = std::tanh(x);
  return push(std::move(n));
}

int Graph::sigmoid(int a) {
  Node n;
  n.op = Op::kSigmoid;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.val = value(a);
  for (auto& x : n.val.v) x = 1.0f / (1.0f + std::exp(-x));
  return push(std::move(n));
}

int Graph::concat_cols(std::span<const int> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const int rows = value(parts[0]).rows();
  int cols = 0;
  bool needs = false;
  for (int id : parts) {
    const Tensor& t = value(id);
    if (t.rows() != rows) shape_fail("concat_cols", value(parts[0]), t);
    cols += t.cols();
    needs = needs || at(id).needs_grad;
  }
  Node n;
  n.op = Op::kConcatCols;
  n.more.assign(parts.begin(), parts.end());
  n.needs_grad = needs;
  n.val = Tensor::zeros({rows, cols});
  int off = 0;
  for (int id : parts) {
    const Tensor& t = value(id);
    for (int r = 0; r < rows; ++r)
      std::copy_n(t.row(r), t.cols(), n.val.row(r) + off);
    off += t.cols();
  }
  return push(std::move(n));
}

int Graph::dueling(int value_id, int advantage) {
  const Tensor& tv = value(value_id);
  const Tensor& ta = value(advantage);
  if (tv.rows() != ta.rows() || tv.cols() != 1) shape_fail("dueling", tv, ta);
  Node n;
  n.op = Op::kDueling;
  n.a = value_id;
  n.b = advantage;
  n.needs_grad = at(value_id).needs_grad || at(advantage).needs_grad;
  n.val = ta;
  const int cols = ta.cols();
  for (int r = 0; r < ta.rows(); ++r) {
    double m = 0.0;
    for (int j = 0; j < cols; ++j) m += ta.at(r, j);
    const float shift = tv.at(r, 0) - static_cast<float>(m / cols);
    for (int j = 0; j < cols; ++j) n.val.at(r, j) += shift;
  }
  return push(std::move(n));
}

int Graph::softmax_rows(int a) {
  Node n;
  n.op = Op::kSoftmaxRows;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.val = value(a);
  const int cols = n.val.cols();
  for (int r = 0; r < n.val.rows(); ++r) {
    float* row = &n.val.at(r, 0);
    float m = row[0];
    for (int j = 1; j < cols; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - m);
      z += row[j];
    }
    const float inv = static_cast<float>(1.0 / z);
    for (int j = 0; j < cols; ++j) row[j] *= inv;
  }
  return push(std::move(n));
}

int Graph::softmax_xent_mean(int logits, std::vector<int> labels, std::vector<float> mask) {
  const Tensor& tl = value(logits);
  const int rows = tl.rows();
  const int cols = tl.cols();
  if (static_cast<int>(labels.size()) != rows)
    throw ConfigError("softmax_xent_mean: " + std::to_string(labels.size()) +
                      " labels for " + std::to_string(rows) + " rows");
  if (!mask.empty() && static_cast<int>(mask.size()) != rows)
    throw ConfigError("softmax_xent_mean: mask size mismatch");
  Node n;
  n.op = Op::kSoftmaxXentMean;
  n.a = logits;
  n.needs_grad = at(logits).needs_grad;
  n.index = std::move(labels);
  n.mask = std::move(mask);
  n.aux = tl;  // softmax probabilities, cached for backward
  double total = 0.0;
  double count = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int label = n.index[static_cast<std::size_t>(r)];
    if (label < 0 || label >= cols)
      throw ConfigError("softmax_xent_mean: label " + std::to_string(label) + " out of range");
    float* row = &n.aux.at(r, 0);
    float m = row[0];
    for (int j = 1; j < cols; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < cols; ++j) z += std::exp(static_cast<double>(row[j]) - m);
    const double log_z = std::log(z) + m;
    const double nll = log_z - row[label];
    const float w = n.mask.empty() ? 1.0f : n.mask[static_cast<std::size_t>(r)];
    total += w * nll;
    count += w;
    const float inv = static_cast<float>(1.0 / z);
    for (int j = 0; j < cols; ++j)
      row[j] = std::exp(row[j] - m) * inv;
  }
  n.k = count > 0.0 ? static_cast<float>(1.0 / count) : 0.0f;  // reused in backward
  n.val = Tensor::scalar(count > 0.0 ? static_cast<float>(total / count) : 0.0f);
  return push(std::move(n));
}

int Graph::gather_cols(int a, std::vector<int> index) {
  const Tensor& ta = value(a);
  if (static_cast<int>(index.size()) != ta.rows())
    throw ConfigError("gather_cols: index size mismatch");
  Node n;
  n.op = Op::kGatherCols;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.index = std::move(index);
  n.val = Tensor::zeros({ta.rows(), 1});
  for (int r = 0; r < ta.rows(); ++r) {
    const int j = n.index[static_cast<std::size_t>(r)];
    if (j < 0 || j >= ta.cols())
      throw ConfigError("gather_cols: index " + std::to_string(j) + " out of range");
    n.val.at(r, 0) = ta.at(r, j);
  }
  return push(std::move(n));
}

int Graph::row_stop_grad(int a, std::vector<float> row_mask) {
  const Tensor& ta = value(a);
  if (static_cast<int>(row_mask.size()) != ta.rows())
    throw ConfigError("row_stop_grad: mask size mismatch");
  Node n;
  n.op = Op::kRowStopGrad;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.mask = std::move(row_mask);
  n.val = ta;
  return push(std::move(n));
}

int Graph::row_sum(int a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kRowSum;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  n.val = Tensor::zeros({ta.rows(), 1});
  for (int r = 0; r < ta.rows(); ++r) {
    double s = 0.0;
    for (int j = 0; j < ta.cols(); ++j) s += ta.at(r, j);
    n.val.at(r, 0) = static_cast<float>(s);
  }
  return push(std::move(n));
}

int Graph::mean(int a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kMean;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  double s = 0.0;
  for (float x : ta.v) s += x;
  n.val = Tensor::scalar(ta.size() > 0 ? static_cast<float>(s / ta.size()) : 0.0f);
  return push(std::move(n));
}

int Graph::sum(int a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSum;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  double s = 0.0;
  for (float x : ta.v) s += x;
  n.val = Tensor::scalar(static_cast<float>(s));
  return push(std::move(n));
}

int Graph::sum_squares(int a) {
  const Tensor& ta = value(a);
  Node n;
  n.op = Op::kSumSquares;
  n.a = a;
  n.needs_grad = at(a).needs_grad;
  double s = 0.0;
  for (float x : ta.v) s += static_cast<double>(x) * x;
  n.val = Tensor::scalar(static_cast<float>(s));
  return push(std::move(n));
}

Tensor& Graph::grad_buf(int id) {
  Node& n = at(id);
  if (n.grad.v.empty()) {
    Shape s = n.op == Op::kParam ? n.param->shape : n.val.shape;
    n.grad = Tensor::zeros(s);
  }
  return n.grad;
}

void Graph::accumulate(int id, const float* g, int n) {
  Tensor& buf = grad_buf(id);
  for (int i = 0; i < n; ++i) buf.v[static_cast<std::size_t>(i)] += g[i];
}

void Graph::check_scalar(int id, const char* who) const {
  if (value(id).size() != 1)
    throw UsageError(std::string(who) + ": node is not a scalar, shape " +
                     shape_str(value(id).shape));
}

void Graph::backward(int loss_id) {
  if (nodes_.empty()) throw UsageError("backward: no recorded graph");
  if (backward_done_) throw UsageError("backward: already ran on this graph");
  check_scalar(loss_id, "backward");
  backward_done_ = true;
  if (!at(loss_id).needs_grad) return;  // constant loss: all gradients zero
  grad_buf(loss_id).v[0] = 1.0f;

  for (int id = loss_id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.v.empty()) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
      case Op::kParam:
        break;
      case Op::kMatMul: {
        const Tensor& ta = value(n.a);
        const Tensor& tb = value(n.b);
        if (at(n.a).needs_grad) {
          Tensor& da = grad_buf(n.a);
          mmap(da).noalias() += cmap(g) * cmap(tb).transpose();
        }
        if (at(n.b).needs_grad) {
          Tensor& db = grad_buf(n.b);
          mmap(db).noalias() += cmap(ta).transpose() * cmap(g);
        }
        break;
      }
      case Op::kOneHotMatMul: {
        if (!at(n.a).needs_grad) break;
        Tensor& dw = grad_buf(n.a);
        const int out = g.cols();
        for (int r = 0; r < n.cats.rows(); ++r) {
          const std::uint8_t* cat = n.cats.row(r);
          const float* src = g.row(r);
          for (int cell = 0; cell < n.cats.cells; ++cell) {
            float* dst = dw.row(cell * n.cats.channels + cat[cell]);
            for (int j = 0; j < out; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case Op::kAddRow: {
        if (at(n.a).needs_grad) accumulate(n.a, g.v.data(), g.size());
        if (at(n.b).needs_grad) {
          Tensor& db = grad_buf(n.b);
          for (int r = 0; r < g.rows(); ++r)
            for (int j = 0; j < g.cols(); ++j) db.v[static_cast<std::size_t>(j)] += g.at(r, j);
        }
        break;
      }
      case Op::kAdd:
        if (at(n.a).needs_grad) accumulate(n.a, g.v.data(), g.size());
        if (at(n.b).needs_grad) accumulate(n.b, g.v.data(), g.size());
        break;
      case Op::kSub: {
        if (at(n.a).needs_grad) accumulate(n.a, g.v.data(), g.size());
        if (at(n.b).needs_grad) {
          Tensor& db = grad_buf(n.b);
          for (int i = 0; i < g.size(); ++i) db.v[static_cast<std::size_t>(i)] -= g.v[static_cast<std::size_t>(i)];
        }
        break;
      }
      case Op::kMul: {
        const Tensor& ta = value(n.a);
        const Tensor& tb = value(n.b);
        if (at(n.a).needs_grad) {
          Tensor& da = grad_buf(n.a);
          for (int i = 0; i < g.size(); ++i) da.v[static_cast<std::size_t>(i)] += g.v[static_cast<std::size_t>(i)] * tb.v[static_cast<std::size_t>(i)];
        }
        if (at(n.b).needs_grad) {
          Tensor& db = grad_buf(n.b);
          for (int i = 0; i < g.size(); ++i) db.v[static_cast<std::size_t>(i)] += g.v[static_cast<std::size_t>(i)] * ta.v[static_cast<std::size_t>(i)];
        }
        break;
      }
      case Op::kScaleAdd: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (int i = 0; i < g.size(); ++i) da.v[static_cast<std::size_t>(i)] += n.k * g.v[static_cast<std::size_t>(i)];
        break;
      }
      case Op::kRelu: {
        if (!at(n.a).needs_grad) break;
        const Tensor& x = value(n.a);
        Tensor& da = grad_buf(n.a);
        for (int i = 0; i < g.size(); ++i)
          if (x.v[static_cast<std::size_t>(i)] > 0.0f) da.v[static_cast<std::size_t>(i)] += g.v[static_cast<std::size_t>(i)];
        break;
      }
      case Op::kTanh: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (int i = 0; i < g.size(); ++i) {
          const float y = n.val.v[static_cast<std::size_t>(i)];
          da.v[static_cast<std::size_t>(i)] += g.v[static_cast<std::size_t>(i)] * (1.0f - y * y);
        }
        break;
      }
      case Op::kSigmoid: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (int i = 0; i < g.size(); ++i) {
          const float y = n.val.v[static_cast<std::size_t>(i)];
          da.v[static_cast<std::size_t>(i)] += g.v[static_cast<std::size_t>(i)] * y * (1.0f - y);
        }
        break;
      }
      case Op::kConcatCols: {
        int off = 0;
        for (int src : n.more) {
          const Tensor& t = value(src);
          if (at(src).needs_grad) {
            Tensor& d = grad_buf(src);
            for (int r = 0; r < g.rows(); ++r)
              for (int j = 0; j < t.cols(); ++j) d.at(r, j) += g.at(r, off + j);
          }
          off += t.cols();
        }
        break;
      }
      case Op::kDueling: {
        const int cols = g.cols();
        if (at(n.a).needs_grad) {
          Tensor& dv = grad_buf(n.a);
          for (int r = 0; r < g.rows(); ++r) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += g.at(r, j);
            dv.at(r, 0) += static_cast<float>(s);
          }
        }
        if (at(n.b).needs_grad) {
          Tensor& da = grad_buf(n.b);
          for (int r = 0; r < g.rows(); ++r) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += g.at(r, j);
            const float m = static_cast<float>(s / cols);
            for (int j = 0; j < cols; ++j) da.at(r, j) += g.at(r, j) - m;
          }
        }
        break;
      }
      case Op::kSoftmaxRows: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        const int cols = g.cols();
        for (int r = 0; r < g.rows(); ++r) {
          double dot = 0.0;
          for (int j = 0; j < cols; ++j) dot += static_cast<double>(g.at(r, j)) * n.val.at(r, j);
          for (int j = 0; j < cols; ++j)
            da.at(r, j) += (g.at(r, j) - static_cast<float>(dot)) * n.val.at(r, j);
        }
        break;
      }
      case Op::kSoftmaxXentMean: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        const float gscale = g.v[0] * n.k;
        const int cols = da.cols();
        for (int r = 0; r < da.rows(); ++r) {
          const float w = n.mask.empty() ? 1.0f : n.mask[static_cast<std::size_t>(r)];
          if (w == 0.0f) continue;
          const int label = n.index[static_cast<std::size_t>(r)];
          for (int j = 0; j < cols; ++j) {
            float p = n.aux.at(r, j);
            if (j == label) p -= 1.0f;
            da.at(r, j) += gscale * w * p;
          }
        }
        break;
      }
      case Op::kGatherCols: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (int r = 0; r < g.rows(); ++r)
          da.at(r, n.index[static_cast<std::size_t>(r)]) += g.at(r, 0);
        break;
      }
      case Op::kRowStopGrad: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (int r = 0; r < g.rows(); ++r) {
          const float m = n.mask[static_cast<std::size_t>(r)];
          if (m == 0.0f) continue;
          for (int j = 0; j < g.cols(); ++j) da.at(r, j) += m * g.at(r, j);
        }
        break;
      }
      case Op::kRowSum: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (int r = 0; r < da.rows(); ++r)
          for (int j = 0; j < da.cols(); ++j) da.at(r, j) += g.at(r, 0);
        break;
      }
      case Op::kMean: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        const float gv = g.v[0] / static_cast<float>(da.size());
        for (auto& x : da.v) x += gv;
        break;
      }
      case Op::kSum: {
        if (!at(n.a).needs_grad) break;
        Tensor& da = grad_buf(n.a);
        for (auto& x : da.v) x += g.v[0];
        break;
      }
      case Op::kSumSquares: {
        if (!at(n.a).needs_grad) break;
        const Tensor& x = value(n.a);
        Tensor& da = grad_buf(n.a);
        for (int i = 0; i < da.size(); ++i)
          da.v[static_cast<std::size_t>(i)] += 2.0f * g.v[0] * x.v[static_cast<std::size_t>(i)];
        break;
      }
    }
  }
}

Tensor Graph::param_grad(const Tensor* p) const {
  if (!backward_done_) throw UsageError("param_grad: backward() has not run");
  auto it = param_ids_.find(p);
  if (it == param_ids_.end() || at(it->second).grad.v.empty())
    return Tensor::zeros(p->shape);
  return at(it->second).grad;
}

const Tensor* Graph::node_grad(int id) const {
  const Node& n = at(id);
  return n.grad.v.empty() ? nullptr : &n.grad;
}

}  // namespace neverup
