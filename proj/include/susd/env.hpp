#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "susd/factor_spec.hpp"

namespace susd {

struct EnvStep {
  std::vector<double> next_state;
  double task_reward = 0.0;  // 0 during reward-free pretraining
  bool done = false;
  std::map<std::string, double> info;
};

// Factored-MDP environment. Instances are independent; a single instance is
// single-threaded. Dynamics are deterministic given (seed, action sequence).
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual int obs_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual int episode_length() const = 0;
  virtual const FactorSpec& factor_spec() const = 0;

  // Square position bounds [lo, hi] shared by both axes, used for binning.
  virtual std::pair<double, double> position_bounds() const = 0;

  virtual std::vector<double> reset(uint64_t seed) = 0;
  virtual EnvStep step(const std::vector<double>& action) = 0;
  virtual const std::vector<double>& state() const = 0;

  virtual std::unique_ptr<Env> clone_fresh() const = 0;
};

struct EnvParams {
  int agents = 10;          // Multi-Particle agent count M
  int episode_length = 0;   // 0 = environment default
  bool unlimited_ammo = false;
};

// Environment ids: gunner, multiparticle, multiparticle-mini, pointnav.
std::unique_ptr<Env> make_env(const std::string& id, const EnvParams& params = {});

}  // namespace susd
