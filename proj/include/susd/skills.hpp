#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "susd/error.hpp"
#include "susd/factor_spec.hpp"
#include "susd/graph.hpp"
#include "susd/mlp.hpp"
#include "susd/rng.hpp"

namespace susd {

enum class SkillMode { continuous, discrete };

// Block-structured latent skill: one block of dimension D per state factor.
// Continuous blocks are drawn i.i.d. standard normal; discrete blocks are
// uniform one-hot.
struct SkillVector {
  SkillMode mode = SkillMode::continuous;
  std::vector<std::vector<double>> blocks;

  int factor_count() const { return static_cast<int>(blocks.size()); }
  int block_dim() const { return blocks.empty() ? 0 : static_cast<int>(blocks[0].size()); }

  std::vector<double> flat() const {
    std::vector<double> out;
    for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  // Index of the active one-hot entry of block i (discrete mode).
  int one_hot_index(int i) const {
    const auto& b = blocks.at(i);
    for (size_t k = 0; k < b.size(); ++k)
      if (b[k] == 1.0) return static_cast<int>(k);
    throw ContractError("SkillVector: block is not one-hot");
  }
};

inline SkillVector sample_skill(SkillMode mode, int n_factors, int dim, Rng& rng) {
  SkillVector z;
  z.mode = mode;
  z.blocks.resize(n_factors);
  for (auto& b : z.blocks) {
    b.assign(dim, 0.0);
    if (mode == SkillMode::continuous) {
      for (auto& x : b) x = rng.normal();
    } else {
      b[rng.uniform_int(dim)] = 1.0;
    }
  }
  return z;
}

// N independent factor embeddings phi_i: dim(s^i) -> D, with one nonnegative
// Lagrange multiplier per factor enforcing the per-factor norm constraint.
template <typename S>
struct EmbeddingBank {
  std::vector<Mlp<S>> nets;
  std::vector<S> lambdas;
  S slack_eps = static_cast<S>(1e-6);
  int skill_dim = 2;  // D

  int factor_count() const { return static_cast<int>(nets.size()); }

  std::map<std::string, Mat<S>*> param_map() {
    std::map<std::string, Mat<S>*> m;
    for (size_t i = 0; i < nets.size(); ++i) {
      auto sub = nets[i].param_map("phi" + std::to_string(i));
      m.insert(sub.begin(), sub.end());
    }
    return m;
  }
};

template <typename S>
EmbeddingBank<S> make_embedding_bank(const FactorSpec& spec, int skill_dim,
                                     int hidden_units, int hidden_layers,
                                     S init_lambda, Rng& rng) {
  EmbeddingBank<S> bank;
  bank.skill_dim = skill_dim;
  for (int i = 0; i < spec.count(); ++i) {
    bank.nets.push_back(make_mlp<S>(spec.factor(i).dim(), skill_dim, hidden_units,
                                    hidden_layers, Activation::relu, rng));
    bank.lambdas.push_back(init_lambda);
  }
  return bank;
}

// phi_i(s^i) for a single state vector.
template <typename S>
std::vector<double> phi_eval(const EmbeddingBank<S>& bank, const FactorSpec& spec,
                             const std::vector<double>& state, int i) {
  auto slice = spec.slice(state, i);
  std::vector<S> in(slice.begin(), slice.end());
  auto out = bank.nets[static_cast<size_t>(i)].forward_eval_vec(in);
  return std::vector<double>(out.begin(), out.end());
}

// r_i = (phi_i(s'^i) - phi_i(s^i))^T z^i.
template <typename S>
double factor_reward(const EmbeddingBank<S>& bank, const FactorSpec& spec,
                     const std::vector<double>& s, const std::vector<double>& s_next,
                     const SkillVector& z, int i) {
  if (z.mode != SkillMode::continuous)
    throw ContractError("factor_reward: continuous skill mode required");
  auto a = phi_eval(bank, spec, s, i);
  auto b = phi_eval(bank, spec, s_next, i);
  double r = 0.0;
  for (size_t d = 0; d < a.size(); ++d) r += (b[d] - a[d]) * z.blocks[i][d];
  return r;
}

// Zero-mean contrast across one-hot choices:
//   r^i = delta_k - (1/(D-1)) * sum_{j != k} delta_j,  delta = phi_i(s'^i) - phi_i(s^i).
// Summing over all k gives exactly zero, which is the collapse-prevention point.
template <typename S>
double discrete_factor_reward(const EmbeddingBank<S>& bank, const FactorSpec& spec,
                              const std::vector<double>& s,
                              const std::vector<double>& s_next, int one_hot_index,
                              int i) {
  const int dim = bank.skill_dim;
  if (dim < 2) throw ContractError("discrete_factor_reward: requires D >= 2");
  if (one_hot_index < 0 || one_hot_index >= dim)
    throw ContractError("discrete_factor_reward: one-hot index out of range");
  auto a = phi_eval(bank, spec, s, i);
  auto b = phi_eval(bank, spec, s_next, i);
  double rest = 0.0;
  for (int j = 0; j < dim; ++j)
    if (j != one_hot_index) rest += b[j] - a[j];
  return (b[one_hot_index] - a[one_hot_index]) - rest / (dim - 1);
}

// R = sum_i w_i * r_i with the curiosity weights entering as constants.
// Dispatches on the skill mode so discrete runs reuse the same reward path.
template <typename S>
double total_intrinsic_reward(const EmbeddingBank<S>& bank, const FactorSpec& spec,
                              const std::vector<double>& weights,
                              const std::vector<double>& s,
                              const std::vector<double>& s_next,
                              const SkillVector& z) {
  if (static_cast<int>(weights.size()) != spec.count())
    throw DimensionError("total_intrinsic_reward: need one weight per factor");
  double total = 0.0;
  for (int i = 0; i < spec.count(); ++i) {
    if (weights[i] < 0.0)
      throw ContractError("total_intrinsic_reward: negative weight for factor " +
                          std::to_string(i));
    const double r = z.mode == SkillMode::continuous
                         ? factor_reward(bank, spec, s, s_next, z, i)
                         : discrete_factor_reward(bank, spec, s, s_next,
                                                  z.one_hot_index(i), i);
    total += weights[i] * r;
  }
  return total;
}

// Per-factor goal-directed skill: z^i = (phi_i(g^i) - phi_i(s^i)) normalized to
// unit length, or zero when the embedding displacement is (near) zero.
template <typename S>
SkillVector zero_shot_skill(const EmbeddingBank<S>& bank, const FactorSpec& spec,
                            const std::vector<double>& state,
                            const std::vector<double>& goal) {
  SkillVector z;
  z.mode = SkillMode::continuous;
  for (int i = 0; i < spec.count(); ++i) {
    auto a = phi_eval(bank, spec, state, i);
    auto b = phi_eval(bank, spec, goal, i);
    std::vector<double> dir(a.size());
    double norm = 0.0;
    for (size_t d = 0; d < a.size(); ++d) {
      dir[d] = b[d] - a[d];
      norm += dir[d] * dir[d];
    }
    norm = std::sqrt(norm);
    if (norm < 1e-8) {
      std::fill(dir.begin(), dir.end(), 0.0);
    } else {
      for (auto& x : dir) x /= norm;
    }
    z.blocks.push_back(std::move(dir));
  }
  return z;
}

// Batch of adjacent state pairs tagged with their episode skills (flattened).
template <typename S>
struct PairBatch {
  Mat<S> s;       // n x state_dim
  Mat<S> s_next;  // n x state_dim
  Mat<S> z;       // n x (N * D)
  int count() const { return s.rows; }
};

namespace detail {
// One stacked forward over [s_i; s'_i] rows, split afterwards; halves the
// number of gemm calls per factor.
template <typename S>
typename Graph<S>::Ref factor_delta(Graph<S>& g, const EmbeddingBank<S>& bank,
                                    const FactorSpec& spec, const PairBatch<S>& batch,
                                    int i, bool frozen) {
  const int n = batch.count();
  if (n == 0) throw ContractError("skills: empty batch");
  const auto& f = spec.factor(i);
  Mat<S> stacked(2 * n, f.dim());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < f.dim(); ++c) {
      stacked(r, c) = batch.s(r, f.begin + c);
      stacked(n + r, c) = batch.s_next(r, f.begin + c);
    }
  const std::string prefix = "phi" + std::to_string(i);
  auto both = frozen ? mlp_forward_frozen(g, bank.nets[i], g.constant(stacked))
                     : mlp_forward(g, bank.nets[i], g.constant(stacked), prefix);
  auto ps = g.slice_rows(both, 0, n);
  auto pn = g.slice_rows(both, n, 2 * n);
  return g.sub(pn, ps);
}

// min(eps, 1 - ||delta||_2), one entry per row.
template <typename S>
typename Graph<S>::Ref norm_penalty(Graph<S>& g, typename Graph<S>::Ref delta, S eps) {
  auto norm = g.sqrt_op(g.row_sum(g.square(delta)));
  return g.min_scalar(g.rsub_scalar(S(1), norm), eps);
}
}  // namespace detail

// J^phi_i = E[ r_i + lambda_i * min(eps, 1 - ||dphi_i||) ], to be maximized in
// the parameters of phi_i; lambda_i enters as a constant. Also hands back the
// per-row ||dphi_i|| so training can log it without extra forward passes.
template <typename S>
struct PhiObjective {
  typename Graph<S>::Ref objective;
  typename Graph<S>::Ref dphi_norm;  // n x 1
};

template <typename S>
PhiObjective<S> phi_objective_with_norms(Graph<S>& g, const EmbeddingBank<S>& bank,
                                         const FactorSpec& spec,
                                         const PairBatch<S>& batch, int i) {
  auto delta = detail::factor_delta(g, bank, spec, batch, i, /*frozen=*/false);
  const int d = bank.skill_dim;
  auto zi = g.slice_cols(g.constant(batch.z), i * d, (i + 1) * d);
  auto reward = g.row_sum(g.mul(delta, zi));
  auto norm = g.sqrt_op(g.row_sum(g.square(delta)));
  auto pen = g.min_scalar(g.rsub_scalar(S(1), norm), bank.slack_eps);
  auto obj = g.mean_all(g.add(reward, g.scale(pen, bank.lambdas[i])));
  return {obj, norm};
}

template <typename S>
typename Graph<S>::Ref phi_objective(Graph<S>& g, const EmbeddingBank<S>& bank,
                                     const FactorSpec& spec, const PairBatch<S>& batch,
                                     int i) {
  return phi_objective_with_norms(g, bank, spec, batch, i).objective;
}

// J^lambda_i = -lambda_i * E[ min(eps, 1 - ||dphi_i||) ], to be maximized in
// lambda_i; the embedding is held frozen. Parameter name: "lambda<i>".
template <typename S>
typename Graph<S>::Ref lambda_objective(Graph<S>& g, const EmbeddingBank<S>& bank,
                                        const FactorSpec& spec,
                                        const PairBatch<S>& batch, int i) {
  auto delta = detail::factor_delta(g, bank, spec, batch, i, /*frozen=*/true);
  auto pen = detail::norm_penalty(g, delta, bank.slack_eps);
  auto lam = g.param("lambda" + std::to_string(i),
                     Mat<S>::full(1, 1, bank.lambdas[i]));
  return g.neg(g.mul(lam, g.mean_all(pen)));
}

// Batch statistics used by the plain-ascent lambda update and the metrics:
// mean ||dphi_i|| and mean min(eps, 1 - ||dphi_i||) over the batch.
template <typename S>
struct FactorBatchStats {
  double mean_dphi_norm = 0.0;
  double mean_penalty = 0.0;
};

template <typename S>
FactorBatchStats<S> factor_batch_stats(const EmbeddingBank<S>& bank,
                                       const FactorSpec& spec,
                                       const PairBatch<S>& batch, int i) {
  const int n = batch.count();
  if (n == 0) throw ContractError("skills: empty batch");
  const auto& f = spec.factor(i);
  Mat<S> stacked(2 * n, f.dim());
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < f.dim(); ++c) {
      stacked(r, c) = batch.s(r, f.begin + c);
      stacked(n + r, c) = batch.s_next(r, f.begin + c);
    }
  Mat<S> both = bank.nets[i].forward_eval(stacked);
  FactorBatchStats<S> stats;
  for (int r = 0; r < n; ++r) {
    double sq = 0.0;
    for (int c = 0; c < bank.skill_dim; ++c) {
      const double d =
          static_cast<double>(both(n + r, c)) - static_cast<double>(both(r, c));
      sq += d * d;
    }
    const double norm = std::sqrt(sq);
    stats.mean_dphi_norm += norm;
    stats.mean_penalty += std::min(static_cast<double>(bank.slack_eps), 1.0 - norm);
  }
  stats.mean_dphi_norm /= n;
  stats.mean_penalty /= n;
  return stats;
}

// Plain gradient ascent on J^lambda_i for every factor:
//   lambda_i <- max(0, lambda_i + lr * (-mean penalty)),
// so lambda grows while the constraint is violated and decays at eps-rate
// once satisfied.
template <typename S>
void lambda_ascent_step(EmbeddingBank<S>& bank, const FactorSpec& spec,
                        const PairBatch<S>& batch, S lr) {
  for (int i = 0; i < spec.count(); ++i) {
    const auto stats = factor_batch_stats(bank, spec, batch, i);
    const double updated =
        static_cast<double>(bank.lambdas[i]) - static_cast<double>(lr) * stats.mean_penalty;
    bank.lambdas[i] = static_cast<S>(std::max(0.0, updated));
  }
}

// Batched intrinsic rewards R_j = sum_i w_ij * r_ij for SAC relabeling.
// `weights` has one row per transition and one column per factor.
template <typename S>
std::vector<double> batch_intrinsic_rewards(const EmbeddingBank<S>& bank,
                                            const FactorSpec& spec,
                                            const PairBatch<S>& batch,
                                            const Mat<double>& weights,
                                            SkillMode mode) {
  const int n = batch.count();
  const int d = bank.skill_dim;
  if (weights.rows != n || weights.cols != spec.count())
    throw DimensionError("batch_intrinsic_rewards: weights shape mismatch");
  std::vector<double> total(n, 0.0);
  for (int i = 0; i < spec.count(); ++i) {
    const auto& f = spec.factor(i);
    Mat<S> stacked(2 * n, f.dim());
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < f.dim(); ++c) {
        stacked(r, c) = batch.s(r, f.begin + c);
        stacked(n + r, c) = batch.s_next(r, f.begin + c);
      }
    Mat<S> both = bank.nets[i].forward_eval(stacked);
    for (int r = 0; r < n; ++r) {
      const double w = weights(r, i);
      if (w < 0.0) throw ContractError("batch_intrinsic_rewards: negative weight");
      auto delta = [&](int c) {
        return static_cast<double>(both(n + r, c)) - static_cast<double>(both(r, c));
      };
      double reward = 0.0;
      if (mode == SkillMode::continuous) {
        for (int c = 0; c < d; ++c)
          reward += delta(c) * static_cast<double>(batch.z(r, i * d + c));
      } else {
        int k = 0;
        for (int c = 0; c < d; ++c)
          if (batch.z(r, i * d + c) == S(1)) k = c;
        double rest = 0.0;
        for (int c = 0; c < d; ++c)
          if (c != k) rest += delta(c);
        reward = delta(k) - rest / (d - 1);
      }
      total[r] += w * reward;
    }
  }
  return total;
}

}  // namespace susd
