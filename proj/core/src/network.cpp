#include "neverup/network.hpp"

#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

Network::Network(int input_dim, std::string name)
    : name_(std::move(name)), input_dim_(input_dim), width_(input_dim) {
  if (input_dim <= 0) throw ConfigError(name_ + ": input_dim must be positive");
}

Network::Network(int cells, int channels, std::string name)
    : name_(std::move(name)), cells_(cells), channels_(channels) {
  if (cells <= 0 || channels <= 0)
    throw ConfigError(name_ + ": cells and channels must be positive");
  input_dim_ = cells * channels;
  width_ = input_dim_;
}

Network& Network::dense(int out) {
  if (out <= 0) throw ConfigError(name_ + ": dense width must be positive");
  Layer l;
  l.in = width_;
  l.out = out;
  if (layers_.empty() && cells_ > 0) {
    l.kind = Kind::kOneHotDense;
  } else {
    l.kind = Kind::kDense;
  }
  l.W = Tensor::zeros({l.in, l.out});
  l.b = Tensor::zeros({1, l.out});
  layers_.push_back(std::move(l));
  width_ = out;
  return *this;
}

Network& Network::relu() { return stateless_layer(Kind::kRelu); }
Network& Network::tanh() { return stateless_layer(Kind::kTanh); }
Network& Network::sigmoid() { return stateless_layer(Kind::kSigmoid); }
Network& Network::softmax() { return stateless_layer(Kind::kSoftmax); }

Network& Network::stateless_layer(Kind kind) {
  Layer l;
  l.kind = kind;
  l.in = width_;
  l.out = width_;
  layers_.push_back(std::move(l));
  return *this;
}

Network& Network::gru(int hidden) {
  if (hidden <= 0) throw ConfigError(name_ + ": gru width must be positive");
  Layer l;
  l.kind = Kind::kGru;
  l.in = width_;
  l.out = hidden;
  l.Wxr = Tensor::zeros({l.in, hidden});
  l.Whr = Tensor::zeros({hidden, hidden});
  l.br = Tensor::zeros({1, hidden});
  l.Wxz = Tensor::zeros({l.in, hidden});
  l.Whz = Tensor::zeros({hidden, hidden});
  l.bz = Tensor::zeros({1, hidden});
  l.Wxn = Tensor::zeros({l.in, hidden});
  l.bn = Tensor::zeros({1, hidden});
  l.Whn = Tensor::zeros({hidden, hidden});
  l.bhn = Tensor::zeros({1, hidden});
  layers_.push_back(std::move(l));
  width_ = hidden;
  return *this;
}

namespace {
void fan_in_init(Tensor& w, int fan_in, Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
  for (auto& x : w.v) x = static_cast<float>(rng.uniform(-bound, bound));
}
}  // namespace

void Network::init(Rng& rng) {
  for (Layer& l : layers_) {
    switch (l.kind) {
      case Kind::kDense:
      case Kind::kOneHotDense:
        // One-hot inputs activate one row per cell; the effective fan-in is
        // the number of cells, not the one-hot width.
        fan_in_init(l.W, l.kind == Kind::kOneHotDense ? cells_ : l.in, rng);
        l.b.fill(0.0f);
        break;
      case Kind::kGru:
        fan_in_init(l.Wxr, l.in, rng);
        fan_in_init(l.Whr, l.out, rng);
        fan_in_init(l.Wxz, l.in, rng);
        fan_in_init(l.Whz, l.out, rng);
        fan_in_init(l.Wxn, l.in, rng);
        fan_in_init(l.Whn, l.out, rng);
        l.br.fill(0.0f);
        l.bz.fill(0.0f);
        l.bn.fill(0.0f);
        l.bhn.fill(0.0f);
        break;
      default:
        break;
    }
  }
}

void Network::zero_init() {
  for (NamedParam& p : params()) p.tensor->fill(0.0f);
}

bool Network::has_recurrence() const {
  for (const Layer& l : layers_)
    if (l.kind == Kind::kGru) return true;
  return false;
}

int Network::recurrent_dim() const {
  int n = 0;
  for (const Layer& l : layers_)
    if (l.kind == Kind::kGru) n += l.out;
  return n;
}

Network::State Network::initial_state(int batch) const {
  State s;
  for (const Layer& l : layers_)
    if (l.kind == Kind::kGru) s.h.push_back(Tensor::zeros({batch, l.out}));
  return s;
}

int Network::gru_forward(Graph& g, const Layer& l, int x, int h_prev) const {
  Layer& ml = const_cast<Layer&>(l);
  const int r = g.sigmoid(g.add_row(
      g.add(g.matmul(x, g.param(&ml.Wxr)), g.matmul(h_prev, g.param(&ml.Whr))),
      g.param(&ml.br)));
  const int z = g.sigmoid(g.add_row(
      g.add(g.matmul(x, g.param(&ml.Wxz)), g.matmul(h_prev, g.param(&ml.Whz))),
      g.param(&ml.bz)));
  const int hn = g.add_row(g.matmul(h_prev, g.param(&ml.Whn)), g.param(&ml.bhn));
  const int n = g.tanh_(g.add(g.add_row(g.matmul(x, g.param(&ml.Wxn)), g.param(&ml.bn)),
                              g.mul(r, hn)));
  // h' = (1 - z) * n + z * h
  return g.add(g.mul(g.scale_add(z, -1.0f, 1.0f), n), g.mul(z, h_prev));
}

int Network::forward(Graph& g, const Input& in, const StateNodes* state_in,
                     StateNodes* state_out) const {
  if (cells_ > 0) {
    if (in.cat == nullptr) throw ConfigError(name_ + ": categorical input expected");
    if (in.cat->cells != cells_ || in.cat->channels != channels_)
      throw ConfigError(name_ + ": categorical input is " + std::to_string(in.cat->cells) +
                        "x" + std::to_string(in.cat->channels) + ", expected " +
                        std::to_string(cells_) + "x" + std::to_string(channels_));
    if (layers_.empty() || layers_[0].kind != Kind::kOneHotDense)
      throw ConfigError(name_ + ": categorical network must start with a dense layer");
    Layer& l0 = const_cast<Layer&>(layers_[0]);
    const int cur = g.add_row(g.onehot_matmul(g.param(&l0.W), *in.cat), g.param(&l0.b));
    return forward_layers(g, cur, 1, state_in, state_out);
  }
  if (in.dense == nullptr) throw ConfigError(name_ + ": dense input expected");
  if (in.dense->cols() != input_dim_)
    throw ConfigError(name_ + ": input width " + std::to_string(in.dense->cols()) +
                      ", expected " + std::to_string(input_dim_));
  return forward_layers(g, g.leaf(*in.dense), 0, state_in, state_out);
}

int Network::forward(Graph& g, int input_node, const StateNodes* state_in,
                     StateNodes* state_out) const {
  if (cells_ > 0)
    throw UsageError(name_ + ": node input not supported for categorical networks");
  if (g.value(input_node).cols() != input_dim_)
    throw ConfigError(name_ + ": input width " + std::to_string(g.value(input_node).cols()) +
                      ", expected " + std::to_string(input_dim_));
  return forward_layers(g, input_node, 0, state_in, state_out);
}

int Network::forward_layers(Graph& g, int cur, std::size_t first_layer,
                            const StateNodes* state_in, StateNodes* state_out) const {
  int gru_index = 0;
  for (std::size_t li = first_layer; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    Layer& ml = const_cast<Layer&>(l);
    switch (l.kind) {
      case Kind::kDense:
        cur = g.add_row(g.matmul(cur, g.param(&ml.W)), g.param(&ml.b));
        break;
      case Kind::kOneHotDense:
        throw ConfigError(name_ + ": one-hot layer only valid as the first layer");
      case Kind::kRelu:
        cur = g.relu(cur);
        break;
      case Kind::kTanh:
        cur = g.tanh_(cur);
        break;
      case Kind::kSigmoid:
        cur = g.sigmoid(cur);
        break;
      case Kind::kSoftmax:
        cur = g.softmax_rows(cur);
        break;
      case Kind::kGru: {
        int h_prev;
        if (state_in != nullptr) {
          if (gru_index >= static_cast<int>(state_in->h.size()))
            throw ConfigError(name_ + ": recurrent state has too few entries");
          h_prev = state_in->h[static_cast<std::size_t>(gru_index)];
        } else {
          h_prev = g.leaf(Tensor::zeros({g.value(cur).rows(), l.out}));
        }
        cur = gru_forward(g, l, cur, h_prev);
        if (state_out != nullptr) {
          if (state_out->h.size() <= static_cast<std::size_t>(gru_index))
            state_out->h.resize(static_cast<std::size_t>(gru_index) + 1, -1);
          state_out->h[static_cast<std::size_t>(gru_index)] = cur;
        }
        ++gru_index;
        break;
      }
    }
  }
  return cur;
}

Tensor Network::apply(const Input& in, const State* state_in, State* state_out) const {
  Graph g;
  StateNodes sin, sout;
  if (state_in != nullptr)
    for (const Tensor& h : state_in->h) sin.h.push_back(g.leaf(h));
  const int out = forward(g, in, state_in ? &sin : nullptr, state_out ? &sout : nullptr);
  if (state_out != nullptr) {
    state_out->h.clear();
    for (int id : sout.h) state_out->h.push_back(g.value(id));
  }
  return g.value(out);
}

Tensor Network::apply(const Tensor& dense_in, const State* state_in, State* state_out) const {
  return apply(Input{.dense = &dense_in}, state_in, state_out);
}
Tensor Network::apply(const CatBatch& cat_in, const State* state_in, State* state_out) const {
  return apply(Input{.cat = &cat_in}, state_in, state_out);
}

void Network::collect(std::vector<NamedParam>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& l = layers_[i];
    const std::string base = name_ + ".l" + std::to_string(i) + ".";
    switch (l.kind) {
      case Kind::kDense:
      case Kind::kOneHotDense:
        out.push_back({base + "W", &l.W});
        out.push_back({base + "b", &l.b});
        break;
      case Kind::kGru:
        out.push_back({base + "Wxr", &l.Wxr});
        out.push_back({base + "Whr", &l.Whr});
        out.push_back({base + "br", &l.br});
        out.push_back({base + "Wxz", &l.Wxz});
        out.push_back({base + "Whz", &l.Whz});
        out.push_back({base + "bz", &l.bz});
        out.push_back({base + "Wxn", &l.Wxn});
        out.push_back({base + "bn", &l.bn});
        out.push_back({base + "Whn", &l.Whn});
        out.push_back({base + "bhn", &l.bhn});
        break;
      default:
        break;
    }
  }
}

std::vector<NamedParam> Network::params() {
  std::vector<NamedParam> out;
  collect(out);
  return out;
}

std::vector<NamedParamConst> Network::params() const {
  std::vector<NamedParam> tmp;
  const_cast<Network*>(this)->collect(tmp);
  std::vector<NamedParamConst> out;
  out.reserve(tmp.size());
  for (const NamedParam& p : tmp) out.push_back({p.name, p.tensor});
  return out;
}

int Network::param_count() const {
  int n = 0;
  for (const NamedParamConst& p : params()) n += p.tensor->size();
  return n;
}

void Network::copy_params_from(const Network& other) {
  auto dst = params();
  auto src = other.params();
  if (dst.size() != src.size())
    throw ConfigError(name_ + ": copy_params_from with mismatched layout");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].tensor->shape != src[i].tensor->shape)
      throw ConfigError(name_ + ": parameter shape mismatch at " + dst[i].name);
    dst[i].tensor->v = src[i].tensor->v;
  }
}

std::uint64_t Network::param_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const NamedParamConst& p : params()) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p.tensor->v.data());
    const std::size_t n = p.tensor->v.size() * sizeof(float);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::vector<GradEntry> collect_gradients(const Graph& g, std::vector<NamedParam> params) {
  if (!g.backward_done()) throw UsageError("collect_gradients: backward() has not run");
  std::vector<GradEntry> out;
  out.reserve(params.size());
  for (NamedParam& p : params) out.push_back({p.name, g.param_grad(p.tensor)});
  return out;
}

}  // namespace neverup
