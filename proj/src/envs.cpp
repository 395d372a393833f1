#include "susd/envs.hpp"

#include <algorithm>
#include <cmath>

#include "susd/error.hpp"

namespace susd {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_action(const std::vector<double>& a, int dim, const char* env) {
  if (static_cast<int>(a.size()) != dim)
    throw DimensionError(std::string(env) + ": action dim " + std::to_string(a.size()) +
                         " != " + std::to_string(dim));
  for (double x : a)
    if (!std::isfinite(x)) throw ContractError(std::string(env) + ": non-finite action");
}

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

double wrap_angle(double a) {
  while (a > kPi) a -= 2 * kPi;
  while (a < -kPi) a += 2 * kPi;
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// GunnerEnv

GunnerEnv::GunnerEnv(bool unlimited_ammo, int episode_length)
    : unlimited_ammo_(unlimited_ammo),
      episode_length_(episode_length),
      spec_({{"agent", 0, 6}, {"ammo", 6, 12}, {"target", 12, 18}}, 18),
      state_(18, 0.0) {}

void GunnerEnv::refresh_heading_obs() {
  state_[2] = std::sin(heading_);
  state_[3] = std::cos(heading_);
}

std::vector<double> GunnerEnv::reset(uint64_t seed) {
  rng_ = Rng(seed);
  t_ = 0;
  std::fill(state_.begin(), state_.end(), 0.0);
  state_[0] = rng_.uniform(-4.0, 4.0);  // agent x
  state_[1] = rng_.uniform(-4.0, 4.0);  // agent y
  heading_ = rng_.uniform(-kPi, kPi);
  refresh_heading_obs();
  state_[4] = unlimited_ammo_ ? kMaxAmmo : 0.0;  // ammo count
  state_[5] = 0.0;                               // cooldown
  state_[6] = rng_.uniform(-4.0, 4.0);           // pickup x
  state_[7] = rng_.uniform(-4.0, 4.0);           // pickup y
  state_[8] = 1.0;                               // pickup available
  state_[9] = 0.0;                               // respawn timer
  state_[12] = rng_.uniform(-4.0, 4.0);          // target x
  state_[13] = rng_.uniform(-4.0, 4.0);          // target y
  state_[14] = 1.0;                              // target alive
  state_[15] = 0.0;                              // hit count
  target_respawn_counter_ = 0;
  return state_;
}

EnvStep GunnerEnv::step(const std::vector<double>& action) {
  check_action(action, 6, "gunner");
  std::vector<double> a(6);
  for (int i = 0; i < 6; ++i) a[i] = clip(action[i], -1.0, 1.0);

  EnvStep out;
  const auto [lo, hi] = position_bounds();

  // movement: direct velocity command
  state_[0] = clip(state_[0] + kMoveSpeed * kDt * a[0], lo, hi);
  state_[1] = clip(state_[1] + kMoveSpeed * kDt * a[1], lo, hi);
  heading_ = wrap_angle(heading_ + kTurnRate * kDt * a[5]);
  refresh_heading_obs();

  // cooldown ticks down once per step
  state_[5] = std::max(0.0, state_[5] - 1.0);

  // ammo pickup: requires proximity and a positive mean pickup logit
  if (state_[8] > 0.5) {
    const double dx = state_[0] - state_[6];
    const double dy = state_[1] - state_[7];
    const bool wants = (a[2] + a[3] + a[4]) / 3.0 > 0.0;
    if (wants && std::hypot(dx, dy) < kPickupRadius) {
      state_[4] = std::min(kMaxAmmo, state_[4] + kAmmoPerPickup);
      state_[8] = 0.0;
      state_[9] = kPickupRespawn;
      out.info["ammo_pickup"] = 1.0;
    }
  } else {
    state_[9] = std::max(0.0, state_[9] - 1.0);
    if (state_[9] == 0.0) {
      state_[6] = rng_.uniform(-4.0, 4.0);
      state_[7] = rng_.uniform(-4.0, 4.0);
      state_[8] = 1.0;
    }
  }

  // shooting: automatic whenever loaded and off cooldown
  const bool loaded = unlimited_ammo_ || state_[4] >= 1.0;
  if (loaded && state_[5] == 0.0) {
    if (!unlimited_ammo_) state_[4] -= 1.0;
    state_[5] = kShotCooldown;
    if (state_[14] > 0.5) {
      const double dx = state_[12] - state_[0];
      const double dy = state_[13] - state_[1];
      const double dist = std::hypot(dx, dy);
      const double aim_err = std::abs(wrap_angle(heading_ - std::atan2(dy, dx)));
      if (dist <= kShotRange && aim_err <= kAimTolerance) {
        state_[15] += 1.0;
        state_[14] = 0.0;
        target_respawn_counter_ = kTargetRespawn;
        out.info["target_hit"] = 1.0;
      }
    }
  }
  if (state_[14] < 0.5) {
    target_respawn_counter_ -= 1;
    if (target_respawn_counter_ <= 0) {
      state_[12] = rng_.uniform(-4.0, 4.0);
      state_[13] = rng_.uniform(-4.0, 4.0);
      state_[14] = 1.0;
    }
  }

  t_ += 1;
  out.next_state = state_;
  out.done = t_ >= episode_length_;
  return out;
}

// ---------------------------------------------------------------------------
// MultiParticleEnv

namespace {
FactorSpec make_mp_spec(int agents) {
  std::vector<FactorSpec::Factor> fs;
  for (int i = 0; i < agents; ++i)
    fs.push_back({"agent" + std::to_string(i), 7 * i, 7 * (i + 1)});
  return FactorSpec(fs, 7 * agents);
}
}  // namespace

MultiParticleEnv::MultiParticleEnv(int agents, int episode_length)
    : agents_(agents),
      episode_length_(episode_length),
      spec_(make_mp_spec(agents)),
      state_(7 * static_cast<size_t>(agents), 0.0),
      station_x_(agents, 0.0),
      station_y_(agents, 0.0) {
  if (agents < 1) throw ContractError("multiparticle: need at least one agent");
}

std::vector<double> MultiParticleEnv::reset(uint64_t seed) {
  Rng rng(seed);
  t_ = 0;
  for (int i = 0; i < agents_; ++i) {
    double* f = state_.data() + 7 * i;
    f[0] = rng.uniform(-4.0, 4.0);
    f[1] = rng.uniform(-4.0, 4.0);
    f[2] = 0.0;
    f[3] = 0.0;
    f[4] = 0.0;
    station_x_[i] = rng.uniform(-4.0, 4.0);
    station_y_[i] = rng.uniform(-4.0, 4.0);
    f[5] = station_x_[i] - f[0];
    f[6] = station_y_[i] - f[1];
  }
  return state_;
}

EnvStep MultiParticleEnv::step(const std::vector<double>& action) {
  check_action(action, 5 * agents_, "multiparticle");
  EnvStep out;
  const auto [lo, hi] = position_bounds();

  for (int i = 0; i < agents_; ++i) {
    double* f = state_.data() + 7 * i;
    const double* a = action.data() + 5 * i;
    const double ax = clip(a[0], -1.0, 1.0);
    const double ay = clip(a[1], -1.0, 1.0);

    f[2] = kDamping * f[2] + kDt * kAccel * ax;
    f[3] = kDamping * f[3] + kDt * kAccel * ay;
    double nx = f[0] + kDt * f[2];
    double ny = f[1] + kDt * f[3];
    if (nx < lo || nx > hi) {
      nx = clip(nx, lo, hi);
      f[2] = 0.0;
    }
    if (ny < lo || ny > hi) {
      ny = clip(ny, lo, hi);
      f[3] = 0.0;
    }
    f[0] = nx;
    f[1] = ny;

    const double prev_activation = f[4];
    const double logits = (clip(a[2], -1.0, 1.0) + clip(a[3], -1.0, 1.0) +
                           clip(a[4], -1.0, 1.0)) / 3.0;
    const double dist = std::hypot(station_x_[i] - f[0], station_y_[i] - f[1]);
    f[4] = (dist < kInteractRadius && logits > 0.0) ? 1.0 : 0.0;
    if (f[4] == 1.0 && prev_activation == 0.0)
      out.info["interact_" + std::to_string(i)] = 1.0;

    f[5] = station_x_[i] - f[0];
    f[6] = station_y_[i] - f[1];
  }

  t_ += 1;
  out.next_state = state_;
  out.done = t_ >= episode_length_;
  return out;
}

// ---------------------------------------------------------------------------
// PointNavEnv

PointNavEnv::PointNavEnv(int episode_length)
    : episode_length_(episode_length),
      spec_(FactorSpec::single(4, "agent")),
      state_(4, 0.0) {}

std::vector<double> PointNavEnv::reset(uint64_t seed) {
  Rng rng(seed);
  t_ = 0;
  state_[0] = rng.uniform(-8.0, 8.0);
  state_[1] = rng.uniform(-8.0, 8.0);
  state_[2] = 0.0;
  state_[3] = 0.0;
  return state_;
}

EnvStep PointNavEnv::step(const std::vector<double>& action) {
  check_action(action, 2, "pointnav");
  EnvStep out;
  const auto [lo, hi] = position_bounds();

  state_[2] = kDamping * state_[2] + kDt * kAccel * clip(action[0], -1.0, 1.0);
  state_[3] = kDamping * state_[3] + kDt * kAccel * clip(action[1], -1.0, 1.0);
  double nx = state_[0] + kDt * state_[2];
  double ny = state_[1] + kDt * state_[3];
  if (nx < lo || nx > hi) {
    nx = clip(nx, lo, hi);
    state_[2] = 0.0;
  }
  if (ny < lo || ny > hi) {
    ny = clip(ny, lo, hi);
    state_[3] = 0.0;
  }
  state_[0] = nx;
  state_[1] = ny;

  t_ += 1;
  out.next_state = state_;
  out.done = t_ >= episode_length_;
  return out;
}

// ---------------------------------------------------------------------------
// factory

std::unique_ptr<Env> make_env(const std::string& id, const EnvParams& params) {
  const int ep = params.episode_length;
  if (id == "gunner")
    return std::make_unique<GunnerEnv>(params.unlimited_ammo, ep > 0 ? ep : 200);
  if (id == "multiparticle")
    return std::make_unique<MultiParticleEnv>(params.agents, ep > 0 ? ep : 200);
  if (id == "multiparticle-mini")
    return std::make_unique<MultiParticleEnv>(3, ep > 0 ? ep : 50);
  if (id == "pointnav") return std::make_unique<PointNavEnv>(ep > 0 ? ep : 200);
  throw ConfigError("unknown environment id '" + id + "'");
}

}  // namespace susd
