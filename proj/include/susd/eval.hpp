#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "susd/density.hpp"
#include "susd/env.hpp"
#include "susd/tasks.hpp"
#include "susd/trainer.hpp"

namespace susd {

// --- counting primitives (unit-tested against handcrafted fixtures) -----------

// Distinct (x, y) pairs after rounding each coordinate to two decimals,
// e.g. (0.27392337, -0.46042657) -> (0.27, -0.46).
int count_unique_rounded(const std::vector<std::pair<double, double>>& positions);

// Fraction of a bins x bins grid over [lo, hi]^2 visited by the positions;
// out-of-bounds positions clip to edge cells.
double bin_fraction(const std::vector<std::pair<double, double>>& positions,
                    double lo, double hi, int bins);

// --- coverage ------------------------------------------------------------------

struct CoverageReport {
  std::vector<std::string> factor_names;
  std::vector<int> unique_counts;  // per environment factor
  std::vector<bool> agent_factor;
  int min_agent = 0;
  double mean_agent = 0.0;
  int steps = 0;
  int resample_every = 0;
};

struct BinCoverageReport {
  std::vector<std::string> factor_names;
  std::vector<double> fractions;  // per environment factor
  std::vector<bool> agent_factor;
  double min_agent = 0.0;
  double mean_agent = 0.0;
  int bins_per_axis = 50;
  int steps = 0;
};

// Rolls out the frozen policy with a fresh prior skill every `resample_every`
// steps (deterministic low-level actions) and records the first two dims of
// every environment factor as its (x, y) position trace.
template <typename S>
std::vector<std::vector<std::pair<double, double>>> rollout_positions(
    const PretrainedModel<S>& model, Env& env, int steps, int resample_every,
    uint64_t seed) {
  Rng rng(seed);
  const FactorSpec& env_spec = env.factor_spec();
  std::vector<std::vector<std::pair<double, double>>> traces(
      static_cast<size_t>(env_spec.count()));
  std::vector<double> s = env.reset(rng.next_u64());
  SkillVector z = sample_skill(model.skill_mode, model.spec.count(), model.skill_dim, rng);
  auto record = [&](const std::vector<double>& state) {
    for (int i = 0; i < env_spec.count(); ++i) {
      const auto& f = env_spec.factor(i);
      traces[static_cast<size_t>(i)].push_back({state[f.begin], state[f.begin + 1]});
    }
  };
  record(s);
  for (int t = 1; t <= steps; ++t) {
    if (t % resample_every == 0)
      z = sample_skill(model.skill_mode, model.spec.count(), model.skill_dim, rng);
    const auto a = model.act(s, z, /*stochastic=*/false, rng);
    EnvStep step = env.step(a);
    s = step.next_state;
    record(s);
    if (step.done) s = env.reset(rng.next_u64());
  }
  return traces;
}

CoverageReport coverage_from_traces(
    const std::vector<std::vector<std::pair<double, double>>>& traces,
    const FactorSpec& env_spec, int steps, int resample_every);

BinCoverageReport bins_from_traces(
    const std::vector<std::vector<std::pair<double, double>>>& traces,
    const FactorSpec& env_spec, double lo, double hi, int bins, int steps);

template <typename S>
CoverageReport state_coverage(const PretrainedModel<S>& model, Env& env,
                              int steps = 20000, int resample_every = 200,
                              uint64_t seed = 0) {
  auto traces = rollout_positions(model, env, steps, resample_every, seed);
  return coverage_from_traces(traces, env.factor_spec(), steps, resample_every);
}

template <typename S>
BinCoverageReport bin_coverage(const PretrainedModel<S>& model, Env& env,
                               int bins_per_axis = 50, int steps = 20000,
                               int resample_every = 200, uint64_t seed = 0) {
  auto traces = rollout_positions(model, env, steps, resample_every, seed);
  const auto [lo, hi] = env.position_bounds();
  return bins_from_traces(traces, env.factor_spec(), lo, hi, bins_per_axis, steps);
}

// --- factor decoding --------------------------------------------------------------

struct DecodeConfig {
  int steps = 100000;  // rollout budget; the desk-scale protocol uses 20000
  int resample_every = 200;
  int epochs = 100;
  double learning_rate = 1e-4;
  int batch_size = 1024;
  uint64_t seed = 0;
};

struct DecodeReport {
  std::vector<std::string> factor_names;
  std::vector<double> per_factor_mse;  // on the held-out test split
  double mean_mse = 0.0;
  int chosen_hidden = 0;
  int train_size = 0;
  int val_size = 0;
  int test_size = 0;
};

using EmbedFn = std::function<std::vector<double>(const std::vector<double>&)>;

// Trains one-hidden-layer decoders embedding -> full state for each candidate
// hidden size (Adam, MSE), picks the candidate with the best validation MSE
// and reports per-factor MSE on the untouched test split (80/10/10).
DecodeReport decode_from_embedding(const std::vector<std::vector<double>>& states,
                                   const EmbedFn& embed, const FactorSpec& report_spec,
                                   const std::vector<int>& hidden_candidates,
                                   const DecodeConfig& cfg);

template <typename S>
DecodeReport factor_decode(const PretrainedModel<S>& model, Env& env,
                           const std::vector<int>& hidden_candidates,
                           const DecodeConfig& cfg) {
  auto traces_states = [&]() {
    Rng rng(cfg.seed);
    std::vector<std::vector<double>> states;
    states.reserve(static_cast<size_t>(cfg.steps));
    std::vector<double> s = env.reset(rng.next_u64());
    SkillVector z =
        sample_skill(model.skill_mode, model.spec.count(), model.skill_dim, rng);
    for (int t = 1; t <= cfg.steps; ++t) {
      if (t % cfg.resample_every == 0)
        z = sample_skill(model.skill_mode, model.spec.count(), model.skill_dim, rng);
      const auto a = model.act(s, z, false, rng);
      EnvStep step = env.step(a);
      states.push_back(step.next_state);
      s = step.next_state;
      if (step.done) s = env.reset(rng.next_u64());
    }
    return states;
  }();

  EmbedFn embed = [&model](const std::vector<double>& state) {
    std::vector<double> out;
    for (int i = 0; i < model.spec.count(); ++i) {
      auto e = phi_eval(model.bank, model.spec, state, i);
      out.insert(out.end(), e.begin(), e.end());
    }
    return out;
  };
  return decode_from_embedding(traces_states, embed, env.factor_spec(),
                               hidden_candidates, cfg);
}

// --- zero-shot goal reaching ---------------------------------------------------------

struct ZeroShotReport {
  std::vector<double> per_seed_rewards;
  double mean = 0.0;
  double stddev = 0.0;
  int budget = 0;
};

// Recomputes z = zero_shot_skill(s, goal) at every step and accumulates the
// sparse goal rewards over the budget; repeated across seeds.
template <typename S>
ZeroShotReport zero_shot_eval(const PretrainedModel<S>& model, int budget = 20000,
                              int seeds = 8, uint64_t seed0 = 0) {
  if (model.skill_mode != SkillMode::continuous)
    throw ContractError("zero_shot_eval: discrete-skill checkpoints are unsupported");
  ZeroShotReport report;
  report.budget = budget;
  for (int k = 0; k < seeds; ++k) {
    Rng rng(seed0 + static_cast<uint64_t>(k) * 7919 + 1);
    auto env = make_env(model.env_id, model.env_params);
    PointNavGoalTask task;
    std::vector<double> s = env->reset(rng.next_u64());
    task.reset(s, rng);
    double total = 0.0;
    for (int t = 0; t < budget; ++t) {
      const SkillVector z = zero_shot_skill(model.bank, model.spec, s, task.goal_state());
      const auto a = model.act(s, z, false, rng);
      EnvStep step = env->step(a);
      total += task.reward(s, a, step.next_state);
      s = step.next_state;
      if (step.done) {
        s = env->reset(rng.next_u64());
        // the goal persists across episode resets within one evaluation
      }
    }
    report.per_seed_rewards.push_back(total);
  }
  double sum = 0.0;
  for (double r : report.per_seed_rewards) sum += r;
  report.mean = sum / seeds;
  double var = 0.0;
  for (double r : report.per_seed_rewards) var += (r - report.mean) * (r - report.mean);
  report.stddev = seeds > 1 ? std::sqrt(var / (seeds - 1)) : 0.0;
  return report;
}

}  // namespace susd
