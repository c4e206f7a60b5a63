#include "neverup/rnd.hpp"

#include <cmath>

#include "neverup/errors.hpp"

namespace neverup {

double RunningStats::stddev() const { return std::sqrt(variance()); }

namespace {
Network make_net(int obs_cells, int obs_channels, int obs_dim, const RndConfig& cfg,
                 const char* name) {
  Network n = obs_cells > 0 ? Network(obs_cells, obs_channels, name) : Network(obs_dim, name);
  n.dense(cfg.hidden).relu().dense(cfg.output_dim);
  return n;
}
}  // namespace

RndModel::RndModel(int obs_cells, int obs_channels, const RndConfig& cfg, Rng& rng)
    : cfg_(cfg),
      g_(make_net(obs_cells, obs_channels, 0, cfg, "rnd_g")),
      g_hat_(make_net(obs_cells, obs_channels, 0, cfg, "rnd_ghat")) {
  g_.init(rng);
  g_hat_.init(rng);
}

RndModel::RndModel(int obs_dim, const RndConfig& cfg, Rng& rng)
    : cfg_(cfg),
      g_(make_net(0, 0, obs_dim, cfg, "rnd_g")),
      g_hat_(make_net(0, 0, obs_dim, cfg, "rnd_ghat")) {
  g_.init(rng);
  g_hat_.init(rng);
}

std::vector<double> RndModel::errors(const Network::Input& obs) const {
  const Tensor target = g_.apply(obs);
  const Tensor pred = g_hat_.apply(obs);
  std::vector<double> out(static_cast<std::size_t>(target.rows()));
  for (int r = 0; r < target.rows(); ++r) {
    double e = 0.0;
    for (int j = 0; j < target.cols(); ++j) {
      const double d = static_cast<double>(pred.at(r, j)) - target.at(r, j);
      e += d * d;
    }
    out[static_cast<std::size_t>(r)] = e;
  }
  return out;
}

double RndModel::error(const CatBatch& obs) const {
  return errors(Network::Input{.cat = &obs})[0];
}
double RndModel::error(const Tensor& obs) const {
  return errors(Network::Input{.dense = &obs})[0];
}

int RndModel::build_predictor_loss(Graph& g, const Network::Input& obs,
                                   const std::vector<float>& mask) const {
  const Tensor target = g_.apply(obs);  // frozen branch: plain values
  const int pred = g_hat_.forward(g, obs);
  int diff = g.sub(pred, g.leaf(target));
  if (!mask.empty()) {
    if (static_cast<int>(mask.size()) != target.rows())
      throw ConfigError("rnd loss: mask size mismatch");
    Tensor m = Tensor::zeros({target.rows(), target.cols()});
    float count = 0.0f;
    for (int r = 0; r < target.rows(); ++r) {
      count += mask[static_cast<std::size_t>(r)];
      for (int j = 0; j < target.cols(); ++j) m.at(r, j) = mask[static_cast<std::size_t>(r)];
    }
    diff = g.mul(diff, g.leaf(std::move(m)));
    return g.scale_add(g.sum_squares(diff), count > 0.0f ? 1.0f / count : 0.0f, 0.0f);
  }
  return g.scale_add(g.sum_squares(diff), 1.0f / static_cast<float>(target.rows()), 0.0f);
}

std::vector<NamedParam> RndModel::all_params() {
  std::vector<NamedParam> out = g_.params();
  for (NamedParam& p : g_hat_.params()) out.push_back(p);
  return out;
}

std::vector<NamedParamConst> RndModel::all_params() const {
  std::vector<NamedParamConst> out = g_.params();
  for (const NamedParamConst& p : g_hat_.params()) out.push_back(p);
  return out;
}

double rnd_alpha(const RunningStats& stats, double err) {
  if (stats.count < 2) return 1.0;
  const double sd = stats.stddev();
  if (sd <= 1e-8) return 1.0;
  return 1.0 + (err - stats.mean) / sd;
}

}  // namespace neverup
