#pragma once

#include <chrono>
#include <map>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "susd/checkpoint.hpp"
#include "susd/density.hpp"
#include "susd/env.hpp"
#include "susd/envs.hpp"
#include "susd/error.hpp"
#include "susd/replay_buffer.hpp"
#include "susd/sac.hpp"
#include "susd/skills.hpp"

namespace susd {

enum class Ablation {
  full,
  no_weighting,                  // SUSD-w: curiosity weights pinned to 1
  no_weighting_no_factorization  // SUSD-wf: single embedding over the full state
};

inline std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_weighting: return "susd-w";
    case Ablation::no_weighting_no_factorization: return "susd-wf";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "susd-w") return Ablation::no_weighting;
  if (s == "susd-wf") return Ablation::no_weighting_no_factorization;
  throw ConfigError("unknown ablation '" + s + "' (full | susd-w | susd-wf)");
}

struct PretrainConfig {
  std::string env_id = "multiparticle-mini";
  EnvParams env_params;
  int skill_dim = 2;  // D per factor
  SkillMode skill_mode = SkillMode::continuous;
  int epochs = 300;
  int episodes_per_epoch = 8;
  int grad_steps_per_epoch = 50;
  int batch_size = 256;
  int hidden_units = 256;
  int hidden_layers = 2;
  double learning_rate = 1e-4;
  double init_lambda = 3000.0;
  double slack_eps = 1e-6;
  double gamma = 0.99;
  double tau = 0.995;
  double init_alpha = 0.1;
  size_t buffer_capacity = 100000;
  bool relabel = true;  // recompute intrinsic rewards at update time
  uint64_t seed = 0;
  Ablation ablation = Ablation::full;
  std::string factors_override;  // "", "gunner-over4", "gunner-under2"
};

// Factorization used for training: the environment's spec, the single-factor
// reduction (SUSD-wf), or an over/under-factorization preset.
inline FactorSpec resolve_factor_spec(const Env& env, Ablation ablation,
                                      const std::string& override_id) {
  if (ablation == Ablation::no_weighting_no_factorization)
    return FactorSpec::single(env.obs_dim(), "state");
  if (override_id.empty()) return env.factor_spec();
  if (override_id == "gunner-over4") {
    if (env.name() != "gunner")
      throw ConfigError("factorization 'gunner-over4' requires the gunner env");
    return FactorSpec({{"agent_pos", 0, 3},
                       {"agent_aux", 3, 6},
                       {"ammo", 6, 12},
                       {"target", 12, 18}},
                      18);
  }
  if (override_id == "gunner-under2") {
    if (env.name() != "gunner")
      throw ConfigError("factorization 'gunner-under2' requires the gunner env");
    return FactorSpec({{"agent_ammo", 0, 12}, {"target", 12, 18}}, 18);
  }
  throw ConfigError("unknown factorization override '" + override_id + "'");
}

struct EpochMetrics {
  int epoch = 0;
  std::vector<double> mean_dphi_norm;  // per factor
  std::vector<double> lambda;          // per factor
  double mean_weight = 1.0;
  double mean_intrinsic = 0.0;
  SacLosses sac;
  double wall_seconds = 0.0;
};

// Writes one row per epoch; columns are fixed once the factor count is known.
class MetricsCsv {
 public:
  void open(const std::string& path, int factors) {
    out_.open(path);
    if (!out_) throw IoError("cannot write metrics csv: " + path);
    out_ << "epoch";
    for (int i = 0; i < factors; ++i) out_ << ",dphi_norm_" << i;
    for (int i = 0; i < factors; ++i) out_ << ",lambda_" << i;
    out_ << ",mean_weight,mean_intrinsic,critic_loss,actor_loss,alpha_loss,alpha,"
            "wall_seconds\n";
  }

  void append(const EpochMetrics& m) {
    out_ << m.epoch;
    for (double v : m.mean_dphi_norm) out_ << ',' << v;
    for (double v : m.lambda) out_ << ',' << v;
    out_ << ',' << m.mean_weight << ',' << m.mean_intrinsic << ',' << m.sac.critic_loss
         << ',' << m.sac.actor_loss << ',' << m.sac.alpha_loss << ',' << m.sac.alpha
         << ',' << m.wall_seconds << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

// Algorithm: per epoch, collect episodes with a fresh skill each, fit the
// density model on the epoch's samples, ascend each J^phi_i, ascend J^lambda
// (clamping lambda at 0), then run SAC on the relabeled intrinsic reward.
template <typename S>
class Pretrainer {
 public:
  explicit Pretrainer(const PretrainConfig& cfg)
      : cfg_(cfg),
        env_(make_env(cfg.env_id, cfg.env_params)),
        spec_(resolve_factor_spec(*env_, cfg.ablation, cfg.factors_override)),
        buffer_(cfg.buffer_capacity),
        rng_(cfg.seed),
        opt_phi_(static_cast<S>(cfg.learning_rate)),
        opt_density_(static_cast<S>(cfg.learning_rate)) {
    bank_ = make_embedding_bank<S>(spec_, cfg.skill_dim, cfg.hidden_units,
                                   cfg.hidden_layers, static_cast<S>(cfg.init_lambda),
                                   rng_);
    bank_.slack_eps = static_cast<S>(cfg.slack_eps);
    density_ = make_density_model<S>(env_->obs_dim(), cfg.hidden_units,
                                     cfg.hidden_layers, rng_);
    SacConfig<S> sac_cfg;
    sac_cfg.hidden_units = cfg.hidden_units;
    sac_cfg.hidden_layers = cfg.hidden_layers;
    sac_cfg.learning_rate = static_cast<S>(cfg.learning_rate);
    sac_cfg.gamma = static_cast<S>(cfg.gamma);
    sac_cfg.tau = static_cast<S>(cfg.tau);
    sac_cfg.init_alpha = static_cast<S>(cfg.init_alpha);
    sac_ = std::make_unique<SacAgent<S>>(env_->obs_dim() + skill_dim_total(),
                                         env_->action_dim(), sac_cfg, rng_);
  }

  int skill_dim_total() const { return spec_.count() * cfg_.skill_dim; }
  const FactorSpec& spec() const { return spec_; }
  const PretrainConfig& config() const { return cfg_; }
  EmbeddingBank<S>& bank() { return bank_; }
  GaussianCondModel<S>& density() { return density_; }
  SacAgent<S>& sac() { return *sac_; }
  Env& env() { return *env_; }
  const std::vector<std::string>& last_epoch_phases() const { return phases_; }

  // Rolls out one full episode with the skill fixed throughout.
  std::vector<Transition> collect_episode(const SkillVector& z) {
    std::vector<Transition> traj;
    std::vector<double> s = env_->reset(rng_.next_u64());
    const std::vector<double> z_flat = z.flat();
    bool done = false;
    while (!done) {
      std::vector<double> obs = s;
      obs.insert(obs.end(), z_flat.begin(), z_flat.end());
      const std::vector<double> a = sac_->act(obs, /*stochastic=*/true, rng_);
      EnvStep step = env_->step(a);
      Transition tr;
      tr.s = s;
      tr.a = a;
      tr.s_next = step.next_state;
      tr.z = z_flat;
      tr.task_reward = 0.0;  // reward-free pretraining
      tr.done = step.done;
      tr.stored_intrinsic = total_intrinsic_reward(
          bank_, spec_, current_weights(s, step.next_state), s, step.next_state, z);
      traj.push_back(tr);
      s = step.next_state;
      done = step.done;
    }
    return traj;
  }

  EpochMetrics run_epoch() {
    const auto t0 = std::chrono::steady_clock::now();
    auto mark = [last = t0](const char* phase,
                            std::map<std::string, double>& sink) mutable {
      const auto now = std::chrono::steady_clock::now();
      sink[phase] += std::chrono::duration<double>(now - last).count();
      last = now;
    };
    phase_seconds_.clear();
    phases_.clear();
    EpochMetrics m;
    m.epoch = ++epoch_;

    // 1. collect
    std::vector<Transition> epoch_transitions;
    for (int e = 0; e < cfg_.episodes_per_epoch; ++e) {
      phases_.push_back("collect");
      const SkillVector z =
          sample_skill(cfg_.skill_mode, spec_.count(), cfg_.skill_dim, rng_);
      auto traj = collect_episode(z);
      for (auto& tr : traj) {
        epoch_transitions.push_back(tr);
        buffer_.append(std::move(tr));
      }
    }
    mark("collect", phase_seconds_);

    // 2. density fit on this epoch's samples only
    if (cfg_.ablation == Ablation::full) {
      phases_.push_back("density");
      std::vector<const Transition*> ptrs;
      ptrs.reserve(epoch_transitions.size());
      for (const auto& tr : epoch_transitions) ptrs.push_back(&tr);
      fit_density(density_, opt_density_, ptrs, cfg_.grad_steps_per_epoch,
                  cfg_.batch_size, rng_);
    }
    mark("density", phase_seconds_);

    // 3. ascend each J^phi_i
    phases_.push_back("phi");
    m.mean_dphi_norm.assign(spec_.count(), 0.0);
    auto phi_params = bank_.param_map();
    for (int step = 0; step < cfg_.grad_steps_per_epoch; ++step) {
      const PairBatch<S> batch = sample_pair_batch();
      Graph<S> g;
      typename Graph<S>::Ref total;
      bool first = true;
      std::vector<typename Graph<S>::Ref> norms;
      for (int i = 0; i < spec_.count(); ++i) {
        auto obj = phi_objective_with_norms(g, bank_, spec_, batch, i);
        norms.push_back(obj.dphi_norm);
        total = first ? obj.objective : g.add(total, obj.objective);
        first = false;
      }
      auto loss = g.neg(total);  // Adam minimizes
      if (!g.value(loss).all_finite())
        throw DivergenceError("pretrain: phi objective diverged at epoch " +
                              std::to_string(epoch_));
      auto grads = g.backward(loss);
      adam_step(opt_phi_, phi_params, grads);
      for (int i = 0; i < spec_.count(); ++i) {
        const Mat<S>& nv = g.value(norms[i]);
        double sum = 0.0;
        for (S v : nv.v) sum += static_cast<double>(v);
        m.mean_dphi_norm[i] += sum / nv.rows;
      }
    }
    for (auto& v : m.mean_dphi_norm) v /= cfg_.grad_steps_per_epoch;
    mark("phi", phase_seconds_);

    // 4. ascend J^lambda (plain gradient ascent, clamped at zero)
    phases_.push_back("lambda");
    for (int step = 0; step < cfg_.grad_steps_per_epoch; ++step) {
      const PairBatch<S> batch = sample_pair_batch();
      lambda_ascent_step(bank_, spec_, batch, static_cast<S>(cfg_.learning_rate));
    }
    m.lambda.assign(bank_.lambdas.begin(), bank_.lambdas.end());
    mark("lambda", phase_seconds_);

    // 5. SAC on the intrinsic reward
    phases_.push_back("sac");
    weight_sum_ = 0.0;
    weight_count_ = 0;
    reward_sum_ = 0.0;
    reward_count_ = 0;
    m.sac = sac_->update(
        buffer_,
        [this](const std::vector<const Transition*>& batch) {
          return relabeled_rewards(batch);
        },
        cfg_.grad_steps_per_epoch, cfg_.batch_size, rng_);
    m.mean_weight = weight_count_ > 0 ? weight_sum_ / weight_count_ : 1.0;
    m.mean_intrinsic = reward_count_ > 0 ? reward_sum_ / reward_count_ : 0.0;
    mark("sac", phase_seconds_);

    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return m;
  }

  const std::map<std::string, double>& phase_seconds() const { return phase_seconds_; }

  void save_checkpoint(const std::string& dir) const {
    Checkpoint ck;
    for (int i = 0; i < spec_.count(); ++i)
      ck.put_mlp("phi" + std::to_string(i), bank_.nets[i]);
    Mat<double> lams(1, spec_.count());
    for (int i = 0; i < spec_.count(); ++i)
      lams(0, i) = static_cast<double>(bank_.lambdas[i]);
    ck.put("lambda", lams);
    ck.put_mlp("density", density_.net);
    sac_->save(ck);

    nlohmann::json factors = nlohmann::json::array();
    for (const auto& f : spec_.factors())
      factors.push_back({{"name", f.name}, {"begin", f.begin}, {"end", f.end}});
    ck.meta = {{"env_id", cfg_.env_id},
               {"agents", cfg_.env_params.agents},
               {"episode_length", cfg_.env_params.episode_length},
               {"skill_dim", cfg_.skill_dim},
               {"skill_mode",
                cfg_.skill_mode == SkillMode::continuous ? "continuous" : "discrete"},
               {"hidden_units", cfg_.hidden_units},
               {"hidden_layers", cfg_.hidden_layers},
               {"ablation", ablation_name(cfg_.ablation)},
               {"density_fitted", density_.fitted},
               {"epoch", epoch_},
               {"factors", factors}};
    ck.save(dir);
  }

 private:
  std::vector<double> current_weights(const std::vector<double>& s,
                                      const std::vector<double>& s_next) const {
    if (cfg_.ablation != Ablation::full)
      return std::vector<double>(static_cast<size_t>(spec_.count()), 1.0);
    return curiosity_weights(density_, spec_, s, s_next);
  }

  PairBatch<S> sample_pair_batch() {
    const int b = static_cast<int>(
        std::min<size_t>(static_cast<size_t>(cfg_.batch_size), buffer_.size()));
    const auto idx = buffer_.sample_indices(b, rng_);
    const int sd = env_->obs_dim();
    PairBatch<S> batch;
    batch.s = Mat<S>(b, sd);
    batch.s_next = Mat<S>(b, sd);
    batch.z = Mat<S>(b, skill_dim_total());
    for (int r = 0; r < b; ++r) {
      const Transition& tr = buffer_.at(idx[static_cast<size_t>(r)]);
      for (int c = 0; c < sd; ++c) {
        batch.s(r, c) = static_cast<S>(tr.s[c]);
        batch.s_next(r, c) = static_cast<S>(tr.s_next[c]);
      }
      for (int c = 0; c < skill_dim_total(); ++c)
        batch.z(r, c) = static_cast<S>(tr.z[c]);
    }
    return batch;
  }

  std::vector<double> relabeled_rewards(const std::vector<const Transition*>& batch) {
    const int n = static_cast<int>(batch.size());
    if (!cfg_.relabel) {
      std::vector<double> out;
      out.reserve(batch.size());
      for (const Transition* tr : batch) out.push_back(tr->stored_intrinsic);
      reward_count_ += n;
      for (double r : out) reward_sum_ += r;
      return out;
    }
    const int sd = env_->obs_dim();
    PairBatch<S> pb;
    pb.s = Mat<S>(n, sd);
    pb.s_next = Mat<S>(n, sd);
    pb.z = Mat<S>(n, skill_dim_total());
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < sd; ++c) {
        pb.s(r, c) = static_cast<S>(batch[r]->s[c]);
        pb.s_next(r, c) = static_cast<S>(batch[r]->s_next[c]);
      }
      for (int c = 0; c < skill_dim_total(); ++c)
        pb.z(r, c) = static_cast<S>(batch[r]->z[c]);
    }
    Mat<double> weights =
        cfg_.ablation == Ablation::full
            ? batch_curiosity_weights(density_, spec_, pb.s, pb.s_next)
            : Mat<double>::full(n, spec_.count(), 1.0);
    for (double w : weights.v) weight_sum_ += w;
    weight_count_ += weights.v.size();
    auto rewards = batch_intrinsic_rewards(bank_, spec_, pb, weights, cfg_.skill_mode);
    for (double r : rewards) reward_sum_ += r;
    reward_count_ += n;
    return rewards;
  }

  PretrainConfig cfg_;
  std::unique_ptr<Env> env_;
  FactorSpec spec_;
  ReplayBuffer buffer_;
  Rng rng_;
  EmbeddingBank<S> bank_;
  GaussianCondModel<S> density_;
  std::unique_ptr<SacAgent<S>> sac_;
  AdamState<S> opt_phi_;
  AdamState<S> opt_density_;
  int epoch_ = 0;
  std::vector<std::string> phases_;
  std::map<std::string, double> phase_seconds_;
  double weight_sum_ = 0.0;
  size_t weight_count_ = 0;
  double reward_sum_ = 0.0;
  size_t reward_count_ = 0;
};

// Everything needed to run a pretrained model downstream.
template <typename S>
struct PretrainedModel {
  std::string env_id;
  EnvParams env_params;
  FactorSpec spec;
  SkillMode skill_mode = SkillMode::continuous;
  int skill_dim = 2;
  int hidden_units = 256;
  int hidden_layers = 2;
  EmbeddingBank<S> bank;
  GaussianCondModel<S> density;
  std::unique_ptr<SacAgent<S>> sac;

  int skill_dim_total() const { return spec.count() * skill_dim; }

  std::vector<double> act(const std::vector<double>& s, const SkillVector& z,
                          bool stochastic, Rng& rng) const {
    std::vector<double> obs = s;
    const auto zf = z.flat();
    obs.insert(obs.end(), zf.begin(), zf.end());
    return sac->act(obs, stochastic, rng);
  }
};

template <typename S>
PretrainedModel<S> load_pretrained(const std::string& dir) {
  Checkpoint ck = Checkpoint::load(dir);
  PretrainedModel<S> model;
  model.env_id = ck.meta.at("env_id").get<std::string>();
  model.env_params.agents = ck.meta.value("agents", 10);
  model.env_params.episode_length = ck.meta.value("episode_length", 0);
  model.skill_dim = ck.meta.at("skill_dim").get<int>();
  model.skill_mode = ck.meta.at("skill_mode").get<std::string>() == "discrete"
                         ? SkillMode::discrete
                         : SkillMode::continuous;
  model.hidden_units = ck.meta.at("hidden_units").get<int>();
  model.hidden_layers = ck.meta.at("hidden_layers").get<int>();

  std::vector<FactorSpec::Factor> factors;
  int state_dim = 0;
  for (const auto& f : ck.meta.at("factors")) {
    factors.push_back({f.at("name").get<std::string>(), f.at("begin").get<int>(),
                       f.at("end").get<int>()});
    state_dim = factors.back().end;
  }
  model.spec = FactorSpec(factors, state_dim);

  Rng init_rng(0);
  model.bank = make_embedding_bank<S>(model.spec, model.skill_dim, model.hidden_units,
                                      model.hidden_layers, S(0), init_rng);
  for (int i = 0; i < model.spec.count(); ++i)
    ck.get_mlp("phi" + std::to_string(i), model.bank.nets[i]);
  Mat<double> lams = ck.get<double>("lambda");
  for (int i = 0; i < model.spec.count(); ++i)
    model.bank.lambdas[i] = static_cast<S>(lams(0, i));

  model.density = make_density_model<S>(state_dim, model.hidden_units,
                                        model.hidden_layers, init_rng);
  ck.get_mlp("density", model.density.net);
  model.density.fitted = ck.meta.value("density_fitted", false);

  auto env = make_env(model.env_id, model.env_params);
  SacConfig<S> sac_cfg;
  sac_cfg.hidden_units = model.hidden_units;
  sac_cfg.hidden_layers = model.hidden_layers;
  model.sac = std::make_unique<SacAgent<S>>(
      env->obs_dim() + model.skill_dim_total(), env->action_dim(), sac_cfg, init_rng);
  model.sac->load(ck);
  return model;
}

}  // namespace susd
