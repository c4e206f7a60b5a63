// Independent straight-line oracles used by the tests. These deliberately
// avoid the library's implementation paths: full sorts instead of partial
// selection, double precision throughout, no shared kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "neverup/tensor.hpp"

namespace oracle {

// ---- episodic reward (Alg.-1 style straight-line recomputation) ----------

struct EpisodicParams {
  int k = 10;
  double epsilon = 1e-3;
  double c = 0.001;
  double xi = 0.008;
  double sm = 8.0;
  bool zero_when_empty = false;
};

// memory: m x p embeddings; dm2 carried by the caller (same seeding rule:
// first nonzero mean, then EMA 0.99).
inline double episodic_reward(const std::vector<std::vector<double>>& memory,
                              const std::vector<double>& query, double& dm2,
                              const EpisodicParams& p) {
  std::vector<double> dist;
  dist.reserve(memory.size());
  for (const auto& e : memory) {
    double d = 0.0;
    for (std::size_t j = 0; j < query.size(); ++j) d += (query[j] - e[j]) * (query[j] - e[j]);
    dist.push_back(d);
  }
  std::sort(dist.begin(), dist.end());
  const int kn = std::min<int>(p.k, static_cast<int>(dist.size()));
  if (kn > 0) {
    double mean = std::accumulate(dist.begin(), dist.begin() + kn, 0.0) / kn;
    dm2 = dm2 == 0.0 ? mean : 0.99 * dm2 + 0.01 * mean;
  }
  double kernel_sum = 0.0;
  for (int i = 0; i < kn; ++i) {
    double dn = dm2 == 0.0 ? 0.0 : dist[static_cast<std::size_t>(i)] / dm2;
    dn = std::max(dn - p.xi, 0.0);
    kernel_sum += p.epsilon / (dn + p.epsilon);
  }
  if (kn == 0 && p.zero_when_empty) return 0.0;
  const double sim = std::sqrt(kernel_sum) + p.c;
  return sim > p.sm ? 0.0 : 1.0 / sim;
}

// ---- finite differences ---------------------------------------------------

// Central finite difference through a float32 parameter entry. The effective
// step is measured after float rounding of the perturbed values.
template <class LossFn>
double fd_gradient(neverup::Tensor& param, int index, LossFn&& loss, double h = 1e-3) {
  const float orig = param.v[static_cast<std::size_t>(index)];
  param.v[static_cast<std::size_t>(index)] = static_cast<float>(orig + h);
  const double up = static_cast<double>(param.v[static_cast<std::size_t>(index)]);
  const double lp = loss();
  param.v[static_cast<std::size_t>(index)] = static_cast<float>(orig - h);
  const double dn = static_cast<double>(param.v[static_cast<std::size_t>(index)]);
  const double lm = loss();
  param.v[static_cast<std::size_t>(index)] = orig;
  return (lp - lm) / (up - dn);
}

// 1e-3 relative with a unit scale floor (float32 FD noise makes a pure
// relative check unattainable for near-zero gradients).
inline bool grad_close(double ad, double fd, double tol = 1e-3) {
  return std::abs(ad - fd) <= tol * std::max({1.0, std::abs(ad), std::abs(fd)});
}

// ---- straight-line dense/relu forward -------------------------------------

// y = relu(x W1 + b1) W2 + b2 computed with plain double loops.
inline std::vector<double> mlp2_forward(const std::vector<double>& x,
                                        const neverup::Tensor& w1, const neverup::Tensor& b1,
                                        const neverup::Tensor& w2, const neverup::Tensor& b2) {
  std::vector<double> h(static_cast<std::size_t>(w1.cols()), 0.0);
  for (int j = 0; j < w1.cols(); ++j) {
    double s = b1.v[static_cast<std::size_t>(j)];
    for (int i = 0; i < w1.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w1.at(i, j);
    h[static_cast<std::size_t>(j)] = std::max(s, 0.0);
  }
  std::vector<double> y(static_cast<std::size_t>(w2.cols()), 0.0);
  for (int j = 0; j < w2.cols(); ++j) {
    double s = b2.v[static_cast<std::size_t>(j)];
    for (int i = 0; i < w2.rows(); ++i) s += h[static_cast<std::size_t>(i)] * w2.at(i, j);
    y[static_cast<std::size_t>(j)] = s;
  }
  return y;
}

// ---- straight-line GRU ----------------------------------------------------

struct GruParams {
  // all [in x H] / [H x H] / [H]
  std::vector<std::vector<double>> wxr, whr, wxz, whz, wxn, whn;
  std::vector<double> br, bz, bn, bhn;
};

inline std::vector<double> gru_step(const GruParams& p, const std::vector<double>& x,
                                    const std::vector<double>& h) {
  const std::size_t H = p.br.size();
  auto matvec = [](const std::vector<std::vector<double>>& w, const std::vector<double>& v,
                   std::size_t out) {
    std::vector<double> r(out, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
      for (std::size_t j = 0; j < out; ++j) r[j] += v[i] * w[i][j];
    return r;
  };
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const auto xr = matvec(p.wxr, x, H), hr = matvec(p.whr, h, H);
  const auto xz = matvec(p.wxz, x, H), hz = matvec(p.whz, h, H);
  const auto xn = matvec(p.wxn, x, H), hn = matvec(p.whn, h, H);
  std::vector<double> out(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double r = sig(xr[j] + hr[j] + p.br[j]);
    const double z = sig(xz[j] + hz[j] + p.bz[j]);
    const double n = std::tanh(xn[j] + p.bn[j] + r * (hn[j] + p.bhn[j]));
    out[j] = (1.0 - z) * n + z * h[j];
  }
  return out;
}

// ---- n-step return bootstrap ----------------------------------------------

// y_t = sum_{s=t}^{T-1} gamma^{s-t} r_s + gamma^{T-t} v_final (v_final = 0 on
// terminal sequences).
inline std::vector<double> nstep_returns(const std::vector<double>& rewards, double v_final,
                                         double gamma, bool terminal) {
  const int T = static_cast<int>(rewards.size());
  std::vector<double> y(static_cast<std::size_t>(T));
  double acc = terminal ? 0.0 : v_final;
  for (int t = T - 1; t >= 0; --t) {
    acc = rewards[static_cast<std::size_t>(t)] + gamma * acc;
    y[static_cast<std::size_t>(t)] = acc;
  }
  return y;
}

// ---- chi-squared p-value ---------------------------------------------------

// Regularized lower incomplete gamma P(a, x) (series / continued fraction).
inline double gammp(double a, double x) {
  auto gln = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gln);
  }
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-14) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - gln) * h;
}

// p-value of a chi-squared statistic with `dof` degrees of freedom.
inline double chi2_pvalue(double stat, int dof) { return 1.0 - gammp(dof / 2.0, stat / 2.0); }

// ---- streaming stats recomputation -----------------------------------------

struct MeanVar {
  double mean = 0.0;
  double var = 0.0;  // sample variance
};
inline MeanVar batch_mean_var(const std::vector<double>& xs) {
  MeanVar r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    for (double x : xs) r.var += (x - r.mean) * (x - r.mean);
    r.var /= static_cast<double>(xs.size() - 1);
  }
  return r;
}

}  // namespace oracle
