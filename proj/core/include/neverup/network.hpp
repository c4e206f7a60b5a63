#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neverup/graph.hpp"
#include "neverup/tensor.hpp"

namespace neverup {

struct NamedParam {
  std::string name;
  Tensor* tensor;
};
struct NamedParamConst {
  std::string name;
  const Tensor* tensor;
};

// Sequential stack of layers: dense / one-hot dense / nonlinearity / GRU cell /
// row softmax. Parameters are owned by the network; construction fixes the
// parameter set (count and shapes never change afterwards).
class Network {
 public:
  // Dense (float vector) input of the given width.
  explicit Network(int input_dim, std::string name = "net");
  // Categorical input: `cells` slots, each one-hot over `channels`.
  Network(int cells, int channels, std::string name);

  Network& dense(int out);
  Network& relu();
  Network& tanh();
  Network& sigmoid();
  Network& gru(int hidden);
  Network& softmax();

  // Fan-in-scaled uniform init of all weights (biases zero).
  void init(Rng& rng);
  void zero_init();

  int input_dim() const { return input_dim_; }
  int output_dim() const { return width_; }
  bool categorical_input() const { return cells_ > 0; }
  int cells() const { return cells_; }
  int channels() const { return channels_; }
  const std::string& name() const { return name_; }
  bool has_recurrence() const;
  int recurrent_dim() const;  // total hidden width across GRU layers

  // Per-GRU-layer hidden activations, concatenated row-wise per layer.
  struct State {
    std::vector<Tensor> h;
    bool empty() const { return h.empty(); }
  };
  State initial_state(int batch) const;

  struct Input {
    const Tensor* dense = nullptr;
    const CatBatch* cat = nullptr;
  };
  // Graph-node recurrent state (for backprop through time).
  struct StateNodes {
    std::vector<int> h;
  };

  // Builds the forward computation on `g`; returns the output node. If the
  // network is recurrent, `state_in`/`state_out` carry the hidden activations
  // as graph nodes so gradients flow across timesteps.
  int forward(Graph& g, const Input& in, const StateNodes* state_in = nullptr,
              StateNodes* state_out = nullptr) const;
  // Continues from an existing graph node (keeps gradients flowing when this
  // network consumes another network's output). Dense-input networks only.
  int forward(Graph& g, int input_node, const StateNodes* state_in = nullptr,
              StateNodes* state_out = nullptr) const;

  // Inference convenience: runs forward on a scratch graph.
  Tensor apply(const Input& in, const State* state_in = nullptr,
               State* state_out = nullptr) const;
  Tensor apply(const Tensor& dense_in, const State* state_in = nullptr,
               State* state_out = nullptr) const;
  Tensor apply(const CatBatch& cat_in, const State* state_in = nullptr,
               State* state_out = nullptr) const;

  std::vector<NamedParam> params();
  std::vector<NamedParamConst> params() const;
  int param_count() const;
  void copy_params_from(const Network& other);
  // FNV-1a over the raw parameter bytes; used to assert frozen networks.
  std::uint64_t param_hash() const;

 private:
  enum class Kind : std::uint8_t { kDense, kOneHotDense, kRelu, kTanh, kSigmoid, kGru, kSoftmax };
  struct Layer {
    Kind kind;
    int in = 0, out = 0;
    Tensor W, b;                                            // dense / one-hot
    Tensor Wxr, Whr, br, Wxz, Whz, bz, Wxn, bn, Whn, bhn;   // gru
  };

  Network& stateless_layer(Kind kind);
  void collect(std::vector<NamedParam>& out);
  int gru_forward(Graph& g, const Layer& l, int x, int h_prev) const;
  int forward_layers(Graph& g, int cur, std::size_t first_layer, const StateNodes* state_in,
                     StateNodes* state_out) const;

  std::string name_;
  int input_dim_ = 0;
  int cells_ = 0, channels_ = 0;
  int width_ = 0;
  std::vector<Layer> layers_;
};

// Names and gradients for one training step, in network parameter order.
struct GradEntry {
  std::string name;
  Tensor grad;
};
std::vector<GradEntry> collect_gradients(const Graph& g, std::vector<NamedParam> params);

}  // namespace neverup
