#pragma once

#include <cmath>
#include <map>
#include <string>

#include "susd/error.hpp"
#include "susd/mat.hpp"

namespace susd {

// Adam with bias correction. Moments are keyed by parameter name and created
// lazily on the first step that sees a parameter.
template <typename S>
struct AdamState {
  std::map<std::string, Mat<S>> first_moment;
  std::map<std::string, Mat<S>> second_moment;
  long step_count = 0;
  S learning_rate = static_cast<S>(1e-4);
  S beta1 = static_cast<S>(0.9);
  S beta2 = static_cast<S>(0.999);
  S eps_num = static_cast<S>(1e-8);

  explicit AdamState(S lr = static_cast<S>(1e-4)) : learning_rate(lr) {}
};

// One optimizer step over every (name -> parameter) entry. Gradients missing
// from `grads` are treated as zero. Throws DivergenceError on NaN gradients.
template <typename S>
void adam_step(AdamState<S>& state, const std::map<std::string, Mat<S>*>& params,
               const std::map<std::string, Mat<S>>& grads) {
  state.step_count += 1;
  const S t = static_cast<S>(state.step_count);
  const S bc1 = S(1) - std::pow(state.beta1, t);
  const S bc2 = S(1) - std::pow(state.beta2, t);
  for (const auto& [name, p] : params) {
    auto git = grads.find(name);
    const Mat<S> zero = Mat<S>::zeros(p->rows, p->cols);
    const Mat<S>& g = git == grads.end() ? zero : git->second;
    if (!g.same_shape(*p))
      throw DimensionError("adam_step: gradient shape mismatch for '" + name + "'");
    if (!g.all_finite())
      throw DivergenceError("adam_step: non-finite gradient for parameter '" + name + "'");
    auto mit = state.first_moment.find(name);
    if (mit == state.first_moment.end()) {
      state.first_moment.emplace(name, Mat<S>::zeros(p->rows, p->cols));
      state.second_moment.emplace(name, Mat<S>::zeros(p->rows, p->cols));
    }
    Mat<S>& m = state.first_moment.at(name);
    Mat<S>& v = state.second_moment.at(name);
    for (size_t i = 0; i < p->v.size(); ++i) {
      m.v[i] = state.beta1 * m.v[i] + (S(1) - state.beta1) * g.v[i];
      v.v[i] = state.beta2 * v.v[i] + (S(1) - state.beta2) * g.v[i] * g.v[i];
      const S mhat = m.v[i] / bc1;
      const S vhat = v.v[i] / bc2;
      p->v[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.eps_num);
    }
  }
}

}  // namespace susd
