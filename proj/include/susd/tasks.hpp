#pragma once

#include <memory>
#include <string>
#include <vector>

#include "susd/env.hpp"
#include "susd/rng.hpp"

namespace susd {

// Downstream-task reward wrapper. Stateful within an episode (instruction and
// progress are sampled at reset); rewards are computed from (prev, action,
// next) state triples so wrappers can run on replayed transitions too.
class Task {
 public:
  virtual ~Task() = default;
  virtual std::string name() const = 0;

  // Which environment id this task is defined on.
  virtual std::string env_id() const = 0;

  virtual void reset(const std::vector<double>& state, Rng& rng) = 0;
  virtual double reward(const std::vector<double>& prev,
                        const std::vector<double>& action,
                        const std::vector<double>& next) = 0;

  // Fixed-length instruction vector appended to the high-level observation.
  virtual std::vector<double> instruction() const = 0;
  virtual int instruction_dim() const = 0;
};

// Sparse goal reaching on the PointNav plane: +10 within the goal radius,
// then a fresh goal. Also drives the zero-shot goal protocol, which needs
// direct access to the goal.
class PointNavGoalTask final : public Task {
 public:
  static constexpr double kRadius = 1.0;
  static constexpr double kReward = 10.0;

  std::string name() const override { return "pointnav-goal"; }
  std::string env_id() const override { return "pointnav"; }
  void reset(const std::vector<double>& state, Rng& rng) override;
  double reward(const std::vector<double>& prev, const std::vector<double>& action,
                const std::vector<double>& next) override;
  std::vector<double> instruction() const override { return {gx_ / 10.0, gy_ / 10.0}; }
  int instruction_dim() const override { return 2; }

  // Goal as a full state vector (zero velocity), for skill inference.
  std::vector<double> goal_state() const { return {gx_, gy_, 0.0, 0.0}; }
  void force_goal(double x, double y) {
    gx_ = x;
    gy_ = y;
  }

 private:
  void sample_goal();
  double gx_ = 0.0, gy_ = 0.0;
  Rng rng_;
};

// Task ids: seq-easy|seq-medium|seq-hard, fp-easy|fp-medium|fp-hard|fp-difficult,
// gunner-unlim, gunner-lim, pointnav-goal, pointnav-dense, none.
std::unique_ptr<Task> make_task(const std::string& id, const Env& env);

// Environment + matching task in one step (gunner-unlim needs the
// unlimited-ammo env variant).
struct TaskSetup {
  std::unique_ptr<Env> env;
  std::unique_ptr<Task> task;
};
TaskSetup make_task_setup(const std::string& task_id, const std::string& env_id,
                          const EnvParams& params = {});

}  // namespace susd
