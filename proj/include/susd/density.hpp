#pragma once

#include <cmath>
#include <vector>

#include "susd/adam.hpp"
#include "susd/error.hpp"
#include "susd/factor_spec.hpp"
#include "susd/graph.hpp"
#include "susd/mlp.hpp"
#include "susd/rng.hpp"
#include "susd/trajectory.hpp"

namespace susd {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Conditional Gaussian q(s'|s) = N(mu(s), diag(sigma^2(s))). The net maps the
// full state to [mu, log-variance]; log-variances are clamped to keep the NLL
// bounded on near-deterministic factors. Before the first fit every curiosity
// weight is 1.
template <typename S>
struct GaussianCondModel {
  Mlp<S> net;  // state_dim -> 2 * state_dim
  S logvar_min = static_cast<S>(-10);
  S logvar_max = static_cast<S>(4);
  bool fitted = false;

  int state_dim() const { return net.in_dim(); }
};

template <typename S>
GaussianCondModel<S> make_density_model(int state_dim, int hidden_units,
                                        int hidden_layers, Rng& rng) {
  GaussianCondModel<S> m;
  m.net = make_mlp<S>(state_dim, 2 * state_dim, hidden_units, hidden_layers,
                      Activation::relu, rng);
  return m;
}

// Mean full-state Gaussian NLL over a batch, on the tape (to minimize).
// Parameters are registered under "density/...".
template <typename S>
typename Graph<S>::Ref density_nll_objective(Graph<S>& g,
                                             const GaussianCondModel<S>& model,
                                             const Mat<S>& s, const Mat<S>& s_next) {
  if (s.rows == 0) throw ContractError("density: empty batch");
  if (s.cols != model.state_dim() || !s.same_shape(s_next))
    throw DimensionError("density: batch shape mismatch");
  const int dim = model.state_dim();
  auto out = mlp_forward(g, model.net, g.constant(s), "density");
  auto mu = g.slice_cols(out, 0, dim);
  auto logvar = g.clamp(g.slice_cols(out, dim, 2 * dim), model.logvar_min,
                        model.logvar_max);
  auto diff = g.sub(g.constant(s_next), mu);
  // 0.5 * sum_d [ (x-mu)^2 * exp(-logvar) + logvar + log(2*pi) ]
  auto quad = g.mul(g.square(diff), g.exp_op(g.neg(logvar)));
  auto per_dim = g.add_scalar(g.add(quad, logvar), static_cast<S>(kLog2Pi));
  return g.scale(g.mean_all(g.row_sum(per_dim)), static_cast<S>(0.5));
}

// Predicted (mu, clamped log-variance) for one state.
template <typename S>
void predict_gaussian(const GaussianCondModel<S>& model, const std::vector<double>& s,
                      std::vector<double>& mu, std::vector<double>& logvar) {
  const int dim = model.state_dim();
  std::vector<S> in(s.begin(), s.end());
  auto out = model.net.forward_eval_vec(in);
  mu.resize(dim);
  logvar.resize(dim);
  for (int d = 0; d < dim; ++d) {
    mu[d] = static_cast<double>(out[d]);
    double lv = static_cast<double>(out[dim + d]);
    lv = std::min(static_cast<double>(model.logvar_max),
                  std::max(static_cast<double>(model.logvar_min), lv));
    logvar[d] = lv;
  }
}

// Diagonal-Gaussian NLL over an index range, from explicit (mu, logvar):
//   0.5 * sum_d [ (x_d - mu_d)^2 / sigma_d^2 + log sigma_d^2 + log 2 pi ].
inline double gaussian_range_nll(const std::vector<double>& x,
                                 const std::vector<double>& mu,
                                 const std::vector<double>& logvar, int begin,
                                 int end) {
  double nll = 0.0;
  for (int d = begin; d < end; ++d) {
    const double diff = x[d] - mu[d];
    nll += diff * diff * std::exp(-logvar[d]) + logvar[d] + kLog2Pi;
  }
  return 0.5 * nll;
}

// -log q(s'^i | s): partition the predicted (mu, Sigma) by factor i and
// evaluate the marginal Gaussian, exact for a diagonal covariance.
template <typename S>
double factor_nll(const GaussianCondModel<S>& model, const FactorSpec& spec,
                  const std::vector<double>& s, const std::vector<double>& s_next,
                  int i) {
  std::vector<double> mu, logvar;
  predict_gaussian(model, s, mu, logvar);
  const auto& f = spec.factor(i);
  return gaussian_range_nll(s_next, mu, logvar, f.begin, f.end);
}

template <typename S>
double full_nll(const GaussianCondModel<S>& model, const std::vector<double>& s,
                const std::vector<double>& s_next) {
  std::vector<double> mu, logvar;
  predict_gaussian(model, s, mu, logvar);
  return gaussian_range_nll(s_next, mu, logvar, 0, model.state_dim());
}

// w_i = sqrt(max(0, -log q(s'^i|s))). The floor keeps the square root real;
// a zero weight marks a fully predictable factor. All ones before the first fit.
template <typename S>
std::vector<double> curiosity_weights(const GaussianCondModel<S>& model,
                                      const FactorSpec& spec,
                                      const std::vector<double>& s,
                                      const std::vector<double>& s_next) {
  std::vector<double> w(spec.count(), 1.0);
  if (!model.fitted) return w;
  std::vector<double> mu, logvar;
  predict_gaussian(model, s, mu, logvar);
  for (int i = 0; i < spec.count(); ++i) {
    const auto& f = spec.factor(i);
    const double nll = gaussian_range_nll(s_next, mu, logvar, f.begin, f.end);
    w[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, nll));
  }
  return w;
}

// Batched curiosity weights, one row per transition.
template <typename S>
Mat<double> batch_curiosity_weights(const GaussianCondModel<S>& model,
                                    const FactorSpec& spec, const Mat<S>& s,
                                    const Mat<S>& s_next) {
  Mat<double> w = Mat<double>::full(s.rows, spec.count(), 1.0);
  if (!model.fitted) return w;
  const int dim = model.state_dim();
  Mat<S> out = model.net.forward_eval(s);
  for (int r = 0; r < s.rows; ++r) {
    for (int i = 0; i < spec.count(); ++i) {
      const auto& f = spec.factor(i);
      double nll = 0.0;
      for (int d = f.begin; d < f.end; ++d) {
        const double mu = static_cast<double>(out(r, d));
        double lv = static_cast<double>(out(r, dim + d));
        lv = std::min(static_cast<double>(model.logvar_max),
                      std::max(static_cast<double>(model.logvar_min), lv));
        const double diff = static_cast<double>(s_next(r, d)) - mu;
        nll += diff * diff * std::exp(-lv) + lv + kLog2Pi;
      }
      w(r, i) = std::sqrt(std::max(0.0, 0.5 * nll));
    }
  }
  return w;
}

// Maximum-likelihood fit with Adam on minibatches drawn from the given
// transitions only (Algorithm-style: the current epoch's samples).
template <typename S>
void fit_density(GaussianCondModel<S>& model, AdamState<S>& opt,
                 const std::vector<const Transition*>& transitions, int grad_steps,
                 int batch_size, Rng& rng) {
  if (transitions.empty()) throw ContractError("fit_density: no transitions");
  const int n = static_cast<int>(transitions.size());
  const int dim = model.state_dim();
  auto params = model.net.param_map("density");
  for (int step = 0; step < grad_steps; ++step) {
    const int b = std::min(batch_size, n);
    Mat<S> s(b, dim), s_next(b, dim);
    for (int r = 0; r < b; ++r) {
      const Transition& tr = *transitions[static_cast<size_t>(rng.uniform_int(n))];
      for (int c = 0; c < dim; ++c) {
        s(r, c) = static_cast<S>(tr.s[c]);
        s_next(r, c) = static_cast<S>(tr.s_next[c]);
      }
    }
    Graph<S> g;
    auto loss = density_nll_objective(g, model, s, s_next);
    if (!g.value(loss).all_finite())
      throw DivergenceError("fit_density: non-finite NLL at step " + std::to_string(step));
    auto grads = g.backward(loss);
    adam_step(opt, params, grads);
  }
  model.fitted = true;
}

}  // namespace susd
