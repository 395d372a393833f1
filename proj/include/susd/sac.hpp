#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "susd/adam.hpp"
#include "susd/checkpoint.hpp"
#include "susd/error.hpp"
#include "susd/graph.hpp"
#include "susd/mlp.hpp"
#include "susd/replay_buffer.hpp"
#include "susd/rng.hpp"

namespace susd {

template <typename S>
struct SacConfig {
  int hidden_units = 256;
  int hidden_layers = 2;
  S learning_rate = static_cast<S>(1e-4);
  S gamma = static_cast<S>(0.99);
  S tau = static_cast<S>(0.995);  // target <- tau * target + (1 - tau) * critic
  S init_alpha = static_cast<S>(0.1);
  S action_scale = S(1);  // actions live in [-scale, scale]
  S logstd_min = static_cast<S>(-5);
  S logstd_max = static_cast<S>(2);
};

struct SacLosses {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
  double alpha = 0.0;
  double mean_reward = 0.0;
};

// Soft Actor-Critic with a tanh-squashed Gaussian actor, twin critics with
// Polyak-averaged targets and an adaptive entropy coefficient trained toward
// a target entropy of -action_dim. The policy input is obs = s (+) z.
template <typename S>
class SacAgent {
 public:
  SacAgent(int obs_dim, int act_dim, SacConfig<S> cfg, Rng& rng)
      : obs_dim_(obs_dim),
        act_dim_(act_dim),
        cfg_(cfg),
        target_entropy_(static_cast<S>(-act_dim)),
        log_alpha_(Mat<S>::full(1, 1, std::log(cfg.init_alpha))),
        opt_actor_(cfg.learning_rate),
        opt_critic_(cfg.learning_rate),
        opt_alpha_(cfg.learning_rate) {
    actor_ = make_mlp<S>(obs_dim, 2 * act_dim, cfg.hidden_units, cfg.hidden_layers,
                         Activation::relu, rng);
    q1_ = make_mlp<S>(obs_dim + act_dim, 1, cfg.hidden_units, cfg.hidden_layers,
                      Activation::relu, rng);
    q2_ = make_mlp<S>(obs_dim + act_dim, 1, cfg.hidden_units, cfg.hidden_layers,
                      Activation::relu, rng);
    q1_target_ = q1_;
    q2_target_ = q2_;
  }

  int obs_dim() const { return obs_dim_; }
  int act_dim() const { return act_dim_; }
  double alpha() const { return std::exp(static_cast<double>(log_alpha_.v[0])); }
  const SacConfig<S>& config() const { return cfg_; }

  // --- acting -----------------------------------------------------------------

  std::vector<double> act(const std::vector<double>& obs, bool stochastic,
                          Rng& rng) const {
    Mat<S> mean, logstd;
    policy_stats(to_row(obs), mean, logstd);
    std::vector<double> a(static_cast<size_t>(act_dim_));
    for (int d = 0; d < act_dim_; ++d) {
      double u = static_cast<double>(mean(0, d));
      if (stochastic) u += std::exp(static_cast<double>(logstd(0, d))) * rng.normal();
      a[static_cast<size_t>(d)] =
          static_cast<double>(cfg_.action_scale) * std::tanh(u);
    }
    return a;
  }

  // Sampled action with its log-probability under the squashed Gaussian.
  std::pair<std::vector<double>, double> sample_with_logp(
      const std::vector<double>& obs, Rng& rng) const {
    Mat<S> mean, logstd;
    policy_stats(to_row(obs), mean, logstd);
    std::vector<double> a(static_cast<size_t>(act_dim_));
    double logp = 0.0;
    for (int d = 0; d < act_dim_; ++d) {
      const double m = static_cast<double>(mean(0, d));
      const double ls = static_cast<double>(logstd(0, d));
      const double std_d = std::exp(ls);
      const double eps = rng.normal();
      const double u = m + std_d * eps;
      const double t = std::tanh(u);
      a[static_cast<size_t>(d)] = static_cast<double>(cfg_.action_scale) * t;
      logp += -0.5 * eps * eps - ls - 0.5 * kLog2PiD;
      logp -= std::log(static_cast<double>(cfg_.action_scale) * (1.0 - t * t) + 1e-6);
    }
    return {a, logp};
  }

  // --- losses on the tape (shared by update() and the gradient checks) ----------

  // Mean squared Bellman error of both critics against a fixed target column.
  typename Graph<S>::Ref critic_loss_graph(Graph<S>& g, const Mat<S>& obs,
                                           const Mat<S>& act, const Mat<S>& target) const {
    auto in = g.concat_cols({g.constant(obs), g.constant(act)});
    auto q1 = mlp_forward(g, q1_, in, "q1");
    auto q2 = mlp_forward(g, q2_, in, "q2");
    auto y = g.constant(target);
    return g.add(g.mean_all(g.square(g.sub(q1, y))),
                 g.mean_all(g.square(g.sub(q2, y))));
  }

  // E[ alpha * log pi(a|s) - min(q1, q2)(s, a) ] with reparameterized actions;
  // `noise` carries the fixed standard-normal draws. Critics are frozen.
  typename Graph<S>::Ref actor_loss_graph(Graph<S>& g, const Mat<S>& obs,
                                          const Mat<S>& noise) const {
    auto [action, logp] = squashed_sample_graph(g, obs, noise);
    auto in = g.concat_cols({g.constant(obs), action});
    auto q1 = mlp_forward_frozen(g, q1_, in);
    auto q2 = mlp_forward_frozen(g, q2_, in);
    auto qmin = g.min_elem(q1, q2);
    const S alpha_now = static_cast<S>(alpha());
    return g.mean_all(g.sub(g.scale(logp, alpha_now), qmin));
  }

  // -log_alpha * E[ log pi + target_entropy ], the adaptive-alpha objective.
  typename Graph<S>::Ref alpha_loss_graph(Graph<S>& g, const Mat<S>& logp) const {
    auto la = g.param("log_alpha", log_alpha_);
    auto drive = g.constant(logp);
    auto mean_term = g.mean_all(g.add_scalar(drive, target_entropy_));
    return g.neg(g.mul(la, mean_term));
  }

  // --- training ------------------------------------------------------------------

  // Batched so relabeling can run through the embedding/density nets in one
  // pass per minibatch.
  using RewardFn =
      std::function<std::vector<double>(const std::vector<const Transition*>&)>;

  // One critic step, one actor step, one alpha step and one Polyak update per
  // gradient step. Rewards are recomputed by `reward_fn` at update time.
  SacLosses update(const ReplayBuffer& buffer, const RewardFn& reward_fn,
                   int grad_steps, int batch_size, Rng& rng) {
    if (buffer.size() < static_cast<size_t>(batch_size))
      throw ContractError("sac update: buffer holds fewer transitions than one batch");
    SacLosses totals;
    for (int step = 0; step < grad_steps; ++step) {
      const SacLosses losses = update_once(buffer, reward_fn, batch_size, rng, step);
      totals.critic_loss += losses.critic_loss;
      totals.actor_loss += losses.actor_loss;
      totals.alpha_loss += losses.alpha_loss;
      totals.mean_reward += losses.mean_reward;
    }
    totals.critic_loss /= grad_steps;
    totals.actor_loss /= grad_steps;
    totals.alpha_loss /= grad_steps;
    totals.mean_reward /= grad_steps;
    totals.alpha = alpha();
    return totals;
  }

  // Polyak trail: target <- tau * target + (1 - tau) * critic.
  void polyak_update() {
    blend(q1_target_, q1_);
    blend(q2_target_, q2_);
  }

  // --- persistence ------------------------------------------------------------------

  void save(Checkpoint& ck, const std::string& prefix = "sac") const {
    ck.put_mlp(prefix + "/actor", actor_);
    ck.put_mlp(prefix + "/q1", q1_);
    ck.put_mlp(prefix + "/q2", q2_);
    ck.put_mlp(prefix + "/q1_target", q1_target_);
    ck.put_mlp(prefix + "/q2_target", q2_target_);
    ck.put(prefix + "/log_alpha", log_alpha_);
  }

  void load(const Checkpoint& ck, const std::string& prefix = "sac") {
    ck.get_mlp(prefix + "/actor", actor_);
    ck.get_mlp(prefix + "/q1", q1_);
    ck.get_mlp(prefix + "/q2", q2_);
    ck.get_mlp(prefix + "/q1_target", q1_target_);
    ck.get_mlp(prefix + "/q2_target", q2_target_);
    log_alpha_ = ck.get<S>(prefix + "/log_alpha");
  }

  Mlp<S>& actor() { return actor_; }
  const Mlp<S>& actor() const { return actor_; }
  Mlp<S>& critic1() { return q1_; }
  Mlp<S>& critic2() { return q2_; }
  Mlp<S>& target1() { return q1_target_; }
  Mlp<S>& target2() { return q2_target_; }
  Mat<S>& log_alpha_mat() { return log_alpha_; }

 private:
  static constexpr double kLog2PiD = 1.8378770664093454836;

  Mat<S> to_row(const std::vector<double>& obs) const {
    if (static_cast<int>(obs.size()) != obs_dim_)
      throw DimensionError("sac: observation dim mismatch");
    Mat<S> m(1, obs_dim_);
    for (int c = 0; c < obs_dim_; ++c) m(0, c) = static_cast<S>(obs[c]);
    return m;
  }

  void policy_stats(const Mat<S>& obs, Mat<S>& mean, Mat<S>& logstd) const {
    Mat<S> out = actor_.forward_eval(obs);
    mean = Mat<S>(out.rows, act_dim_);
    logstd = Mat<S>(out.rows, act_dim_);
    for (int r = 0; r < out.rows; ++r)
      for (int d = 0; d < act_dim_; ++d) {
        mean(r, d) = out(r, d);
        S ls = out(r, act_dim_ + d);
        ls = std::min(cfg_.logstd_max, std::max(cfg_.logstd_min, ls));
        logstd(r, d) = ls;
      }
  }

  // Reparameterized squashed-Gaussian sample and per-row log-probability on
  // the tape. Registers the actor parameters under "actor".
  std::pair<typename Graph<S>::Ref, typename Graph<S>::Ref> squashed_sample_graph(
      Graph<S>& g, const Mat<S>& obs, const Mat<S>& noise) const {
    auto out = mlp_forward(g, actor_, g.constant(obs), "actor");
    auto mean = g.slice_cols(out, 0, act_dim_);
    auto logstd = g.clamp(g.slice_cols(out, act_dim_, 2 * act_dim_),
                          cfg_.logstd_min, cfg_.logstd_max);
    auto std_ = g.exp_op(logstd);
    auto u = g.add(mean, g.mul(std_, g.constant(noise)));
    auto t = g.tanh_op(u);
    auto action = g.scale(t, cfg_.action_scale);

    // log N(u; mean, std) - log |d tanh / du * scale|
    auto zscore = g.mul(g.sub(u, mean), g.exp_op(g.neg(logstd)));
    auto gauss = g.add_scalar(g.add(g.scale(g.square(zscore), static_cast<S>(0.5)), logstd),
                              static_cast<S>(0.5 * kLog2PiD));
    auto jac = g.log_op(g.add_scalar(
        g.scale(g.rsub_scalar(S(1), g.square(t)), cfg_.action_scale),
        static_cast<S>(1e-6)));
    auto logp = g.neg(g.row_sum(g.add(gauss, jac)));
    return {action, logp};
  }

  SacLosses update_once(const ReplayBuffer& buffer, const RewardFn& reward_fn,
                        int batch_size, Rng& rng, int step) {
    const auto idx = buffer.sample_indices(batch_size, rng);
    const int n = batch_size;
    std::vector<const Transition*> sampled(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r) sampled[r] = &buffer.at(idx[static_cast<size_t>(r)]);
    const std::vector<double> rewards = reward_fn(sampled);
    if (static_cast<int>(rewards.size()) != n)
      throw ContractError("sac: reward_fn returned a wrong-sized batch");

    Mat<S> obs(n, obs_dim_), obs_next(n, obs_dim_), act(n, act_dim_);
    Mat<S> reward(n, 1), not_done(n, 1);
    double reward_sum = 0.0;
    for (int r = 0; r < n; ++r) {
      const Transition& tr = *sampled[r];
      fill_obs(obs, r, tr.s, tr.z);
      fill_obs(obs_next, r, tr.s_next, tr.z);
      for (int d = 0; d < act_dim_; ++d) act(r, d) = static_cast<S>(tr.a[d]);
      reward_sum += rewards[r];
      reward(r, 0) = static_cast<S>(rewards[r]);
      not_done(r, 0) = tr.done ? S(0) : S(1);
    }

    // Bellman target with the twin-minimum of the target critics and the
    // entropy term, all computed out of tape.
    Mat<S> mean, logstd;
    policy_stats(obs_next, mean, logstd);
    Mat<S> next_act(n, act_dim_);
    Mat<S> next_logp(n, 1);
    const double scale = static_cast<double>(cfg_.action_scale);
    for (int r = 0; r < n; ++r) {
      double lp = 0.0;
      for (int d = 0; d < act_dim_; ++d) {
        const double ls = static_cast<double>(logstd(r, d));
        const double eps = rng.normal();
        const double u = static_cast<double>(mean(r, d)) + std::exp(ls) * eps;
        const double t = std::tanh(u);
        next_act(r, d) = static_cast<S>(scale * t);
        lp += -0.5 * eps * eps - ls - 0.5 * kLog2PiD;
        lp -= std::log(scale * (1.0 - t * t) + 1e-6);
      }
      next_logp(r, 0) = static_cast<S>(lp);
    }
    Mat<S> next_in(n, obs_dim_ + act_dim_);
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < obs_dim_; ++c) next_in(r, c) = obs_next(r, c);
      for (int d = 0; d < act_dim_; ++d) next_in(r, obs_dim_ + d) = next_act(r, d);
    }
    Mat<S> q1t = q1_target_.forward_eval(next_in);
    Mat<S> q2t = q2_target_.forward_eval(next_in);
    Mat<S> target(n, 1);
    const S a_now = static_cast<S>(alpha());
    for (int r = 0; r < n; ++r) {
      const S qmin = std::min(q1t(r, 0), q2t(r, 0));
      target(r, 0) = reward(r, 0) + cfg_.gamma * not_done(r, 0) *
                                        (qmin - a_now * next_logp(r, 0));
    }

    SacLosses losses;

    {  // critic step
      Graph<S> g;
      auto loss = critic_loss_graph(g, obs, act, target);
      losses.critic_loss = static_cast<double>(g.value(loss).scalar());
      if (!std::isfinite(losses.critic_loss))
        throw DivergenceError("sac: critic loss diverged at grad step " +
                              std::to_string(step));
      auto grads = g.backward(loss);
      auto params = critic_params();
      adam_step(opt_critic_, params, grads);
    }

    Mat<S> actor_noise(n, act_dim_);
    for (auto& v : actor_noise.v) v = static_cast<S>(rng.normal());
    Mat<S> logp_values;
    {  // actor step (fresh actions on the batch states)
      Graph<S> g;
      auto [action, logp] = squashed_sample_graph(g, obs, actor_noise);
      auto in = g.concat_cols({g.constant(obs), action});
      auto q1 = mlp_forward_frozen(g, q1_, in);
      auto q2 = mlp_forward_frozen(g, q2_, in);
      auto qmin = g.min_elem(q1, q2);
      auto loss = g.mean_all(g.sub(g.scale(logp, a_now), qmin));
      losses.actor_loss = static_cast<double>(g.value(loss).scalar());
      if (!std::isfinite(losses.actor_loss))
        throw DivergenceError("sac: actor loss diverged at grad step " +
                              std::to_string(step));
      logp_values = g.value(logp);
      auto grads = g.backward(loss);
      auto params = actor_.param_map("actor");
      adam_step(opt_actor_, params, grads);
    }

    {  // alpha step toward target entropy -action_dim
      Graph<S> g;
      auto loss = alpha_loss_graph(g, logp_values);
      losses.alpha_loss = static_cast<double>(g.value(loss).scalar());
      auto grads = g.backward(loss);
      std::map<std::string, Mat<S>*> params{{"log_alpha", &log_alpha_}};
      adam_step(opt_alpha_, params, grads);
    }

    polyak_update();
    losses.alpha = alpha();
    losses.mean_reward = reward_sum / n;
    return losses;
  }

  void fill_obs(Mat<S>& m, int row, const std::vector<double>& s,
                const std::vector<double>& z) const {
    if (static_cast<int>(s.size() + z.size()) != obs_dim_)
      throw DimensionError("sac: transition obs dim mismatch");
    int c = 0;
    for (double v : s) m(row, c++) = static_cast<S>(v);
    for (double v : z) m(row, c++) = static_cast<S>(v);
  }

  std::map<std::string, Mat<S>*> critic_params() {
    auto m = q1_.param_map("q1");
    auto m2 = q2_.param_map("q2");
    m.insert(m2.begin(), m2.end());
    return m;
  }

  void blend(Mlp<S>& target, const Mlp<S>& online) {
    for (size_t l = 0; l < target.layer_count(); ++l) {
      for (size_t i = 0; i < target.weights[l].v.size(); ++i)
        target.weights[l].v[i] =
            cfg_.tau * target.weights[l].v[i] + (S(1) - cfg_.tau) * online.weights[l].v[i];
      for (size_t i = 0; i < target.biases[l].v.size(); ++i)
        target.biases[l].v[i] =
            cfg_.tau * target.biases[l].v[i] + (S(1) - cfg_.tau) * online.biases[l].v[i];
    }
  }

  int obs_dim_;
  int act_dim_;
  SacConfig<S> cfg_;
  S target_entropy_;
  Mlp<S> actor_, q1_, q2_, q1_target_, q2_target_;
  Mat<S> log_alpha_;
  AdamState<S> opt_actor_, opt_critic_, opt_alpha_;
};

}  // namespace susd
