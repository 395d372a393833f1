#pragma once

#include "susd/env.hpp"
#include "susd/rng.hpp"

namespace susd {

// 2D-Gunner: a point agent on a bounded plane collects ammo pickups and
// shoots at a target. 18-dim observation in 3 factors of 6 (agent, ammo,
// target), 6-dim action (2 movement, 3 pickup logits, 1 turn rate).
//
// Layout (the paper gives only totals; these intra-factor layouts are ours):
//   agent  [ 0..6):  x, y, sin(heading), cos(heading), ammo count, cooldown
//   ammo   [ 6..12): pickup x, pickup y, available flag, respawn timer, 0, 0
//   target [12..18): x, y, alive flag, hit count, 0, 0
class GunnerEnv final : public Env {
 public:
  explicit GunnerEnv(bool unlimited_ammo = false, int episode_length = 200);

  std::string name() const override { return "gunner"; }
  int obs_dim() const override { return 18; }
  int action_dim() const override { return 6; }
  int episode_length() const override { return episode_length_; }
  const FactorSpec& factor_spec() const override { return spec_; }
  std::pair<double, double> position_bounds() const override { return {-5.0, 5.0}; }

  std::vector<double> reset(uint64_t seed) override;
  EnvStep step(const std::vector<double>& action) override;
  const std::vector<double>& state() const override { return state_; }
  std::unique_ptr<Env> clone_fresh() const override {
    return std::make_unique<GunnerEnv>(unlimited_ammo_, episode_length_);
  }

  // Dynamics constants, fixed and documented for hand-evaluated tests.
  static constexpr double kDt = 0.1;
  static constexpr double kMoveSpeed = 2.0;
  static constexpr double kTurnRate = 3.14159265358979323846;
  static constexpr double kPickupRadius = 0.6;
  static constexpr int kPickupRespawn = 25;
  static constexpr double kAmmoPerPickup = 3.0;
  static constexpr double kMaxAmmo = 6.0;
  static constexpr double kShotRange = 3.0;
  static constexpr double kAimTolerance = 0.15;
  static constexpr int kShotCooldown = 5;
  static constexpr int kTargetRespawn = 10;

 private:
  void refresh_heading_obs();

  bool unlimited_ammo_;
  int episode_length_;
  FactorSpec spec_;
  std::vector<double> state_;
  double heading_ = 0.0;
  int target_respawn_counter_ = 0;
  int t_ = 0;
  Rng rng_;
};

// Multi-Particle: M independent point-mass agents, each paired with its own
// station. Factor i groups agent i with station i:
//   [ agent x, agent y, vx, vy, station activation, station dx, station dy ]
// Action per agent: 2 acceleration dims + 3 interaction logits.
class MultiParticleEnv final : public Env {
 public:
  explicit MultiParticleEnv(int agents = 10, int episode_length = 200);

  std::string name() const override { return "multiparticle"; }
  int obs_dim() const override { return 7 * agents_; }
  int action_dim() const override { return 5 * agents_; }
  int episode_length() const override { return episode_length_; }
  const FactorSpec& factor_spec() const override { return spec_; }
  std::pair<double, double> position_bounds() const override { return {-5.0, 5.0}; }

  std::vector<double> reset(uint64_t seed) override;
  EnvStep step(const std::vector<double>& action) override;
  const std::vector<double>& state() const override { return state_; }
  std::unique_ptr<Env> clone_fresh() const override {
    return std::make_unique<MultiParticleEnv>(agents_, episode_length_);
  }

  int agents() const { return agents_; }

  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.9;
  static constexpr double kAccel = 2.0;
  static constexpr double kInteractRadius = 0.6;

 private:
  int agents_;
  int episode_length_;
  FactorSpec spec_;
  std::vector<double> state_;
  std::vector<double> station_x_, station_y_;
  int t_ = 0;
};

// PointNav: a single point-mass on a bounded plane, the unfactorized (N = 1)
// stand-in used by the zero-shot goal protocol. Observation [x, y, vx, vy].
class PointNavEnv final : public Env {
 public:
  explicit PointNavEnv(int episode_length = 200);

  std::string name() const override { return "pointnav"; }
  int obs_dim() const override { return 4; }
  int action_dim() const override { return 2; }
  int episode_length() const override { return episode_length_; }
  const FactorSpec& factor_spec() const override { return spec_; }
  std::pair<double, double> position_bounds() const override { return {-10.0, 10.0}; }

  std::vector<double> reset(uint64_t seed) override;
  EnvStep step(const std::vector<double>& action) override;
  const std::vector<double>& state() const override { return state_; }
  std::unique_ptr<Env> clone_fresh() const override {
    return std::make_unique<PointNavEnv>(episode_length_);
  }

  static constexpr double kDt = 0.1;
  static constexpr double kDamping = 0.9;
  static constexpr double kAccel = 2.0;

 private:
  int episode_length_;
  FactorSpec spec_;
  std::vector<double> state_;
  int t_ = 0;
};

}  // namespace susd
