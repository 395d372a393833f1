#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "susd/error.hpp"
#include "susd/graph.hpp"
#include "susd/mat.hpp"
#include "susd/rng.hpp"

namespace susd {

enum class Activation { relu, tanh };

// Fully connected network. layer_sizes = {in, hidden..., out}; the activation
// is applied after every layer except the last.
template <typename S>
struct Mlp {
  std::vector<int> layer_sizes;
  Activation activation = Activation::relu;
  std::vector<Mat<S>> weights;  // layer l: sizes[l] x sizes[l+1]
  std::vector<Mat<S>> biases;   // layer l: 1 x sizes[l+1]

  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation act) : layer_sizes(std::move(sizes)), activation(act) {
    if (layer_sizes.size() < 2) throw DimensionError("Mlp: need at least input and output sizes");
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
      weights.emplace_back(layer_sizes[l], layer_sizes[l + 1]);
      biases.emplace_back(1, layer_sizes[l + 1]);
    }
  }

  int in_dim() const { return layer_sizes.front(); }
  int out_dim() const { return layer_sizes.back(); }
  size_t layer_count() const { return weights.size(); }

  // Xavier-uniform weights, zero biases.
  void init(Rng& rng) {
    for (size_t l = 0; l < weights.size(); ++l) {
      const double a = std::sqrt(6.0 / (layer_sizes[l] + layer_sizes[l + 1]));
      for (auto& w : weights[l].v) w = static_cast<S>(rng.uniform(-a, a));
      for (auto& b : biases[l].v) b = S(0);
    }
  }

  size_t param_count() const {
    size_t n = 0;
    for (const auto& w : weights) n += w.size();
    for (const auto& b : biases) n += b.size();
    return n;
  }

  // Mutable views keyed by "<prefix>/w<l>" and "<prefix>/b<l>".
  std::map<std::string, Mat<S>*> param_map(const std::string& prefix) {
    std::map<std::string, Mat<S>*> m;
    for (size_t l = 0; l < weights.size(); ++l) {
      m[prefix + "/w" + std::to_string(l)] = &weights[l];
      m[prefix + "/b" + std::to_string(l)] = &biases[l];
    }
    return m;
  }

  std::map<std::string, const Mat<S>*> param_map(const std::string& prefix) const {
    std::map<std::string, const Mat<S>*> m;
    for (size_t l = 0; l < weights.size(); ++l) {
      m[prefix + "/w" + std::to_string(l)] = &weights[l];
      m[prefix + "/b" + std::to_string(l)] = &biases[l];
    }
    return m;
  }

  // Plain inference forward, one row per sample.
  Mat<S> forward_eval(const Mat<S>& x) const {
    if (x.cols != in_dim())
      throw DimensionError("Mlp: input dim " + std::to_string(x.cols) + " != " +
                           std::to_string(in_dim()));
    Mat<S> h = x;
    for (size_t l = 0; l < weights.size(); ++l) {
      Mat<S> z = matmul(h, weights[l]);
      for (int r = 0; r < z.rows; ++r)
        for (int c = 0; c < z.cols; ++c) z(r, c) += biases[l](0, c);
      if (l + 1 < weights.size()) {
        if (activation == Activation::relu) {
          for (auto& v : z.v) v = v > S(0) ? v : S(0);
        } else {
          for (auto& v : z.v) v = std::tanh(v);
        }
      }
      h = std::move(z);
    }
    return h;
  }

  std::vector<S> forward_eval_vec(const std::vector<S>& x) const {
    Mat<S> m(1, static_cast<int>(x.size()), x);
    return forward_eval(m).v;
  }
};

// Records the forward pass on a tape with trainable parameters named
// "<prefix>/w<l>", "<prefix>/b<l>".
template <typename S>
typename Graph<S>::Ref mlp_forward(Graph<S>& g, const Mlp<S>& net,
                                   typename Graph<S>::Ref x, const std::string& prefix) {
  if (g.value(x).cols != net.in_dim()) throw DimensionError("mlp_forward: input dim mismatch");
  auto h = x;
  for (size_t l = 0; l < net.layer_count(); ++l) {
    auto w = g.param(prefix + "/w" + std::to_string(l), net.weights[l]);
    auto b = g.param(prefix + "/b" + std::to_string(l), net.biases[l]);
    h = g.add_rowvec(g.matmul(h, w), b);
    if (l + 1 < net.layer_count())
      h = net.activation == Activation::relu ? g.relu(h) : g.tanh_op(h);
  }
  return h;
}

// Same forward pass but with the network weights held constant; gradients can
// still flow through the input (used when optimizing through a frozen critic).
template <typename S>
typename Graph<S>::Ref mlp_forward_frozen(Graph<S>& g, const Mlp<S>& net,
                                          typename Graph<S>::Ref x) {
  if (g.value(x).cols != net.in_dim())
    throw DimensionError("mlp_forward_frozen: input dim mismatch");
  auto h = x;
  for (size_t l = 0; l < net.layer_count(); ++l) {
    auto w = g.constant(net.weights[l]);
    auto b = g.constant(net.biases[l]);
    h = g.add_rowvec(g.matmul(h, w), b);
    if (l + 1 < net.layer_count())
      h = net.activation == Activation::relu ? g.relu(h) : g.tanh_op(h);
  }
  return h;
}

template <typename S>
Mlp<S> make_mlp(int in, int out, int hidden_units, int hidden_layers, Activation act,
                Rng& rng) {
  std::vector<int> sizes;
  sizes.push_back(in);
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_units);
  sizes.push_back(out);
  Mlp<S> net(sizes, act);
  net.init(rng);
  return net;
}

}  // namespace susd
