#pragma once

#include <memory>
#include <string>
#include <vector>

#include "susd/replay_buffer.hpp"
#include "susd/sac.hpp"
#include "susd/tasks.hpp"
#include "susd/trainer.hpp"

namespace susd {

struct HrlConfig {
  std::string task_id = "gunner-unlim";
  int k_steps = 5;          // low-level steps per skill selection
  double skill_box = 1.5;   // executed skills lie in [-box, box]^(N*D)
  int epochs = 400;
  int episodes_per_epoch = 1;
  int grad_steps_per_epoch = 50;
  int batch_size = 256;
  int hidden_units = 256;
  int hidden_layers = 2;
  double learning_rate = 1e-4;
  double gamma = 0.99;
  double tau = 0.995;
  double init_alpha = 0.1;
  size_t buffer_capacity = 100000;
  uint64_t seed = 0;
};

struct CurvePoint {
  int epoch = 0;
  double mean_return = 0.0;
};

// Downstream learner: a high-level SAC policy pi(z | s, instruction) picks a
// skill every K environment steps; the frozen pretrained skill policy executes
// it. The high-level MDP's reward per decision is the sum of the K low-level
// task rewards.
template <typename S>
class HrlTrainer {
 public:
  HrlTrainer(const PretrainedModel<S>* low, HrlConfig cfg)
      : low_(low), cfg_(cfg), buffer_(cfg.buffer_capacity), rng_(cfg.seed) {
    auto setup = make_task_setup(cfg.task_id, low->env_id, low->env_params);
    env_ = std::move(setup.env);
    task_ = std::move(setup.task);
    hl_obs_dim_ = env_->obs_dim() + task_->instruction_dim();
    SacConfig<S> sac_cfg;
    sac_cfg.hidden_units = cfg.hidden_units;
    sac_cfg.hidden_layers = cfg.hidden_layers;
    sac_cfg.learning_rate = static_cast<S>(cfg.learning_rate);
    sac_cfg.gamma = static_cast<S>(cfg.gamma);
    sac_cfg.tau = static_cast<S>(cfg.tau);
    sac_cfg.init_alpha = static_cast<S>(cfg.init_alpha);
    sac_cfg.action_scale = static_cast<S>(cfg.skill_box);
    high_ = std::make_unique<SacAgent<S>>(hl_obs_dim_, low->skill_dim_total(),
                                          sac_cfg, rng_);
  }

  Env& env() { return *env_; }
  SacAgent<S>& high_policy() { return *high_; }
  const ReplayBuffer& buffer() const { return buffer_; }

  // One high-level decision: hold z for K low-level steps (or until the
  // episode ends) and accumulate the task reward.
  struct HrlStep {
    std::vector<double> next_state;
    double reward_sum = 0.0;
    std::vector<double> step_rewards;  // one entry per executed low-level step
    bool done = false;
    int low_steps = 0;
  };

  HrlStep hrl_step(const std::vector<double>& state, const std::vector<double>& z_flat) {
    HrlStep out;
    SkillVector z = skill_from_flat(z_flat);
    std::vector<double> s = state;
    for (int k = 0; k < cfg_.k_steps; ++k) {
      const std::vector<double> a = low_->act(s, z, /*stochastic=*/false, rng_);
      EnvStep step = env_->step(a);
      const double r = task_->reward(s, a, step.next_state);
      out.reward_sum += r;
      out.step_rewards.push_back(r);
      s = step.next_state;
      out.low_steps += 1;
      if (step.done) {
        out.done = true;
        break;
      }
    }
    out.next_state = s;
    return out;
  }

  // Collect one episode with the stochastic high-level policy; returns the
  // episode's task return and appends high-level transitions to the buffer.
  double collect_episode(bool store = true) {
    std::vector<double> s = env_->reset(rng_.next_u64());
    task_->reset(s, rng_);
    double episode_return = 0.0;
    bool done = false;
    while (!done) {
      const std::vector<double> obs = high_obs(s);
      const std::vector<double> z = high_->act(obs, /*stochastic=*/true, rng_);
      HrlStep step = hrl_step(s, z);
      episode_return += step.reward_sum;
      if (store) {
        Transition tr;
        tr.s = obs;
        tr.a = z;
        tr.s_next = high_obs(step.next_state);
        tr.task_reward = step.reward_sum;
        tr.done = step.done;
        buffer_.append(std::move(tr));
      }
      s = step.next_state;
      done = step.done;
    }
    return episode_return;
  }

  CurvePoint run_epoch() {
    epoch_ += 1;
    double sum = 0.0;
    for (int e = 0; e < cfg_.episodes_per_epoch; ++e) sum += collect_episode();
    if (buffer_.size() >= static_cast<size_t>(cfg_.batch_size)) {
      high_->update(
          buffer_,
          [](const std::vector<const Transition*>& batch) {
            std::vector<double> out;
            out.reserve(batch.size());
            for (const Transition* t : batch) out.push_back(t->task_reward);
            return out;
          },
          cfg_.grad_steps_per_epoch, cfg_.batch_size, rng_);
    }
    return {epoch_, sum / cfg_.episodes_per_epoch};
  }

  std::vector<CurvePoint> run(int epochs) {
    std::vector<CurvePoint> curve;
    curve.reserve(static_cast<size_t>(epochs));
    for (int e = 0; e < epochs; ++e) curve.push_back(run_epoch());
    return curve;
  }

 private:
  std::vector<double> high_obs(const std::vector<double>& s) const {
    std::vector<double> obs = s;
    const auto instr = task_->instruction();
    obs.insert(obs.end(), instr.begin(), instr.end());
    return obs;
  }

  SkillVector skill_from_flat(const std::vector<double>& z_flat) const {
    SkillVector z;
    z.mode = low_->skill_mode;
    const int n = low_->spec.count();
    const int d = low_->skill_dim;
    z.blocks.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      std::vector<double> block(z_flat.begin() + i * d, z_flat.begin() + (i + 1) * d);
      if (z.mode == SkillMode::discrete) {
        // project the box action onto the nearest one-hot vertex
        int best = 0;
        for (int c = 1; c < d; ++c)
          if (block[c] > block[best]) best = c;
        std::fill(block.begin(), block.end(), 0.0);
        block[static_cast<size_t>(best)] = 1.0;
      }
      z.blocks[static_cast<size_t>(i)] = std::move(block);
    }
    return z;
  }

  const PretrainedModel<S>* low_;
  HrlConfig cfg_;
  std::unique_ptr<Env> env_;
  std::unique_ptr<Task> task_;
  int hl_obs_dim_ = 0;
  std::unique_ptr<SacAgent<S>> high_;
  ReplayBuffer buffer_;
  Rng rng_;
  int epoch_ = 0;
};

}  // namespace susd
