#include "susd/tasks.hpp"

#include <algorithm>
#include <cmath>

#include "susd/envs.hpp"
#include "susd/error.hpp"

namespace susd {

namespace {

// Interacting with the assigned stations in instruction order: +1 for the
// correct next station, -1 for any out-of-sequence interaction. The sequence
// restarts once completed.
class SeqTask final : public Task {
 public:
  SeqTask(int length, int agents, std::string name)
      : length_(length), agents_(agents), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  std::string env_id() const override { return "multiparticle"; }

  void reset(const std::vector<double>&, Rng& rng) override {
    seq_.clear();
    int prev = -1;
    for (int i = 0; i < length_; ++i) {
      int k = rng.uniform_int(agents_);
      while (agents_ > 1 && k == prev) k = rng.uniform_int(agents_);
      seq_.push_back(k);
      prev = k;
    }
    ptr_ = 0;
  }

  double reward(const std::vector<double>& prev, const std::vector<double>&,
                const std::vector<double>& next) override {
    double r = 0.0;
    for (int k = 0; k < agents_; ++k) {
      const bool rising = next[7 * k + 4] == 1.0 && prev[7 * k + 4] == 0.0;
      if (!rising) continue;
      if (k == seq_[ptr_]) {
        r += 1.0;
        ptr_ = (ptr_ + 1) % length_;
      } else {
        r -= 1.0;
      }
    }
    return r;
  }

  std::vector<double> instruction() const override {
    std::vector<double> out(instruction_dim(), 0.0);
    for (int i = 0; i < length_; ++i)
      out[i] = static_cast<double>(seq_[i] + 1) / agents_;
    out[4] = static_cast<double>(ptr_) / length_;
    return out;
  }
  int instruction_dim() const override { return 5; }  // up to 4 entries + progress

 private:
  int length_;
  int agents_;
  std::string name_;
  std::vector<int> seq_;
  int ptr_ = 0;
};

// Each flagged station delivers food (+1) or poison (-1) on interaction;
// flags are drawn at episode start. Indicator length is capped by the agent
// count on small variants.
class FpTask final : public Task {
 public:
  FpTask(int length, int agents, std::string name)
      : length_(std::min(length, agents)), agents_(agents), name_(std::move(name)) {}

  std::string name() const override { return name_; }
  std::string env_id() const override { return "multiparticle"; }

  void reset(const std::vector<double>&, Rng& rng) override {
    flags_.assign(agents_, 0.0);
    for (int i = 0; i < length_; ++i) flags_[i] = rng.uniform() < 0.5 ? 1.0 : -1.0;
  }

  double reward(const std::vector<double>& prev, const std::vector<double>&,
                const std::vector<double>& next) override {
    double r = 0.0;
    for (int k = 0; k < agents_; ++k)
      if (next[7 * k + 4] == 1.0 && prev[7 * k + 4] == 0.0) r += flags_[k];
    return r;
  }

  std::vector<double> instruction() const override {
    std::vector<double> out(instruction_dim(), 0.0);
    for (int i = 0; i < std::min(agents_, instruction_dim()); ++i) out[i] = flags_[i];
    return out;
  }
  int instruction_dim() const override { return 10; }

 private:
  int length_;
  int agents_;
  std::string name_;
  std::vector<double> flags_;
};

// +1 per target hit (hit counter lives at state[15]).
class GunnerTask final : public Task {
 public:
  explicit GunnerTask(std::string name) : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::string env_id() const override { return "gunner"; }
  void reset(const std::vector<double>&, Rng&) override {}
  double reward(const std::vector<double>& prev, const std::vector<double>&,
                const std::vector<double>& next) override {
    return next[15] - prev[15];
  }
  std::vector<double> instruction() const override { return {}; }
  int instruction_dim() const override { return 0; }

 private:
  std::string name_;
};

// Dense shaping variant: per-step reward -dist(position, origin) / 10.
class PointNavDenseTask final : public Task {
 public:
  std::string name() const override { return "pointnav-dense"; }
  std::string env_id() const override { return "pointnav"; }
  void reset(const std::vector<double>&, Rng&) override {}
  double reward(const std::vector<double>&, const std::vector<double>&,
                const std::vector<double>& next) override {
    return -std::hypot(next[0], next[1]) / 10.0;
  }
  std::vector<double> instruction() const override { return {}; }
  int instruction_dim() const override { return 0; }
};

// Reward-free wrapper (pretraining / control experiments).
class NoneTask final : public Task {
 public:
  std::string name() const override { return "none"; }
  std::string env_id() const override { return "*"; }
  void reset(const std::vector<double>&, Rng&) override {}
  double reward(const std::vector<double>&, const std::vector<double>&,
                const std::vector<double>&) override {
    return 0.0;
  }
  std::vector<double> instruction() const override { return {}; }
  int instruction_dim() const override { return 0; }
};

}  // namespace

void PointNavGoalTask::reset(const std::vector<double>&, Rng& rng) {
  rng_ = rng.fork(0x90a1);
  sample_goal();
}

double PointNavGoalTask::reward(const std::vector<double>&,
                                const std::vector<double>&,
                                const std::vector<double>& next) {
  if (std::hypot(next[0] - gx_, next[1] - gy_) <= kRadius) {
    sample_goal();
    return kReward;
  }
  return 0.0;
}

void PointNavGoalTask::sample_goal() {
  gx_ = rng_.uniform(-8.0, 8.0);
  gy_ = rng_.uniform(-8.0, 8.0);
}

namespace {

int seq_length(const std::string& id) {
  if (id == "seq-easy") return 2;
  if (id == "seq-medium") return 3;
  if (id == "seq-hard") return 4;
  return 0;
}

int fp_length(const std::string& id) {
  if (id == "fp-easy") return 2;
  if (id == "fp-medium") return 5;
  if (id == "fp-hard") return 8;
  if (id == "fp-difficult") return 10;
  return 0;
}

}  // namespace

std::unique_ptr<Task> make_task(const std::string& id, const Env& env) {
  auto require_env = [&](const std::string& want) {
    if (env.name() != want)
      throw ConfigError("task '" + id + "' requires environment '" + want +
                        "', got '" + env.name() + "'");
  };

  if (int n = seq_length(id); n > 0) {
    require_env("multiparticle");
    const auto* mp = dynamic_cast<const MultiParticleEnv*>(&env);
    return std::make_unique<SeqTask>(n, mp->agents(), id);
  }
  if (int n = fp_length(id); n > 0) {
    require_env("multiparticle");
    const auto* mp = dynamic_cast<const MultiParticleEnv*>(&env);
    return std::make_unique<FpTask>(n, mp->agents(), id);
  }
  if (id == "gunner-unlim" || id == "gunner-lim") {
    require_env("gunner");
    return std::make_unique<GunnerTask>(id);
  }
  if (id == "pointnav-goal") {
    require_env("pointnav");
    return std::make_unique<PointNavGoalTask>();
  }
  if (id == "pointnav-dense") {
    require_env("pointnav");
    return std::make_unique<PointNavDenseTask>();
  }
  if (id == "none") return std::make_unique<NoneTask>();
  throw ConfigError("unknown task name '" + id + "'");
}

TaskSetup make_task_setup(const std::string& task_id, const std::string& env_id,
                          const EnvParams& params) {
  EnvParams p = params;
  if (task_id == "gunner-unlim") p.unlimited_ammo = true;
  TaskSetup setup;
  setup.env = make_env(env_id, p);
  setup.task = make_task(task_id, *setup.env);
  return setup;
}

}  // namespace susd
