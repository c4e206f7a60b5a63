#pragma once

#include <span>
#include <unordered_map>
#include <vector>

#include "neverup/tensor.hpp"

namespace neverup {

// Reverse-mode tape. Nodes are appended in evaluation order (so the tape is
// already topologically sorted) and backward() walks it once in reverse.
// Values are computed eagerly at node creation; only nodes that can reach a
// parameter carry gradient storage.
class Graph {
 public:
  enum class Op : std::uint8_t {
    kLeaf,
    kParam,
    kMatMul,         // a[BxK] * b[KxN]
    kOneHotMatMul,   // rows of param W summed per categorical cell
    kAddRow,         // a[BxN] + bias[N]
    kAdd,
    kSub,
    kMul,            // elementwise
    kScaleAdd,       // k*a + c
    kRelu,
    kTanh,
    kSigmoid,
    kConcatCols,
    kDueling,        // value[Bx1], advantage[BxN] -> V + A - mean(A)
    kSoftmaxRows,
    kSoftmaxXentMean,  // mean masked cross-entropy vs integer labels
    kGatherCols,       // a[BxN] gathered at per-row column index -> [Bx1]
    kRowStopGrad,      // identity; rows with mask 0 pass no gradient
    kRowSum,           // [BxN] -> [Bx1]
    kMean,             // -> scalar
    kSum,              // -> scalar
    kSumSquares,       // -> scalar
  };

  int leaf(Tensor value);
  // Parameter leaf; gradient is accumulated for it. The tensor must outlive
  // the graph. Repeated calls with the same pointer return the same node.
  int param(Tensor* p);

  int matmul(int a, int b);
  int onehot_matmul(int w, const CatBatch& input);
  int add_row(int a, int bias);
  int add(int a, int b);
  int sub(int a, int b);
  int mul(int a, int b);
  int scale_add(int a, float k, float c);
  int relu(int a);
  int tanh_(int a);
  int sigmoid(int a);
  int concat_cols(std::span<const int> parts);
  int dueling(int value, int advantage);
  int softmax_rows(int a);
  // mask may be empty (all rows count). Loss is averaged over counted rows.
  int softmax_xent_mean(int logits, std::vector<int> labels, std::vector<float> mask = {});
  int gather_cols(int a, std::vector<int> index);
  // Forward identity; backward multiplies each row's gradient by row_mask
  // (0 cuts the row, used to stop BPTT at burn-in boundaries).
  int row_stop_grad(int a, std::vector<float> row_mask);
  int row_sum(int a);
  int mean(int a);
  int sum(int a);
  int sum_squares(int a);

  const Tensor& value(int id) const;
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  // Reverse accumulation from a scalar node. May be called once per graph.
  void backward(int loss_id);
  bool backward_done() const { return backward_done_; }

  // Gradient of a parameter tensor after backward(); zeros if the parameter
  // never influenced the loss.
  Tensor param_grad(const Tensor* p) const;
  const Tensor* node_grad(int id) const;

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    std::vector<int> more;     // concat inputs
    Tensor val;                // unused for kParam (value lives in *param)
    Tensor grad;
    Tensor* param = nullptr;
    bool needs_grad = false;
    float k = 0.0f, c = 0.0f;  // scale_add payload
    std::vector<int> index;    // labels / gather indices
    std::vector<float> mask;   // xent mask
    Tensor aux;                // cached softmax probabilities
    CatBatch cats;             // one-hot input payload
  };

  int push(Node n);
  Node& at(int id);
  const Node& at(int id) const;
  void accumulate(int id, const float* g, int n);
  Tensor& grad_buf(int id);
  void check_scalar(int id, const char* who) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, int> param_ids_;
  bool backward_done_ = false;
};

}  // namespace neverup
