#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "susd/envs.hpp"
#include "susd/tasks.hpp"
#include "susd/trajectory.hpp"

using namespace susd;

TEST_CASE("reset: same seed gives identical states") {
  for (const char* id : {"gunner", "multiparticle", "multiparticle-mini", "pointnav"}) {
    auto env = make_env(id);
    auto s1 = env->reset(123);
    auto env2 = make_env(id);
    auto s2 = env2->reset(123);
    CHECK(s1 == s2);
  }
}

TEST_CASE("reset: declared observation and action dimensions") {
  auto gunner = make_env("gunner");
  CHECK(gunner->reset(0).size() == 18);
  CHECK(gunner->action_dim() == 6);
  CHECK(gunner->factor_spec().count() == 3);

  auto mp = make_env("multiparticle");
  CHECK(mp->reset(0).size() == 70);
  CHECK(mp->action_dim() == 50);
  CHECK(mp->factor_spec().count() == 10);

  auto mini = make_env("multiparticle-mini");
  CHECK(mini->reset(0).size() == 21);
  CHECK(mini->action_dim() == 15);
  CHECK(mini->episode_length() == 50);

  auto nav = make_env("pointnav");
  CHECK(nav->reset(0).size() == 4);
  CHECK(nav->action_dim() == 2);
  CHECK(nav->factor_spec().count() == 1);
}

TEST_CASE("step: zero action in PointNav leaves position unchanged from rest") {
  PointNavEnv env;
  auto s0 = env.reset(5);
  auto step = env.step({0.0, 0.0});
  CHECK(step.next_state[0] == s0[0]);
  CHECK(step.next_state[1] == s0[1]);
  CHECK(step.next_state[2] == 0.0);
  CHECK(step.next_state[3] == 0.0);
}

TEST_CASE("step: PointNav damping slows a moving agent with zero action") {
  PointNavEnv env;
  env.reset(5);
  env.step({1.0, 0.0});
  const double v_before = env.state()[2];
  auto step = env.step({0.0, 0.0});
  CHECK(step.next_state[2] == doctest::Approx(PointNavEnv::kDamping * v_before));
}

TEST_CASE("step: Gunner movement action increases x by speed * dt") {
  GunnerEnv env;
  auto s0 = env.reset(17);
  REQUIRE(s0[4] == 0.0);  // no ammo at reset, so no shot fires
  auto step = env.step({1.0, 0.0, 0.0, 0.0, 0.0, 0.0});
  CHECK(step.next_state[0] ==
        doctest::Approx(s0[0] + GunnerEnv::kMoveSpeed * GunnerEnv::kDt).epsilon(1e-12));
  CHECK(step.next_state[1] == doctest::Approx(s0[1]));
}

TEST_CASE("step: NaN action raises a contract error") {
  auto env = make_env("pointnav");
  env->reset(0);
  CHECK_THROWS_AS(env->step({std::nan(""), 0.0}), ContractError);
}

TEST_CASE("step: MultiParticle actions only influence their own factor") {
  // Differential form: two instances, actions differ only in agent i's slice.
  for (uint64_t seed : {0ULL, 9ULL, 77ULL}) {
    MultiParticleEnv a(10), b(10);
    a.reset(seed);
    b.reset(seed);
    Rng rng(seed + 1);
    for (int t = 0; t < 20; ++t) {
      std::vector<double> act_a(50), act_b(50);
      for (int k = 0; k < 50; ++k) act_a[k] = act_b[k] = rng.uniform(-1, 1);
      const int i = rng.uniform_int(10);
      for (int k = 0; k < 5; ++k) act_b[5 * i + k] = rng.uniform(-1, 1);
      auto sa = a.step(act_a).next_state;
      auto sb = b.step(act_b).next_state;
      for (int j = 0; j < 10; ++j) {
        if (j == i) continue;
        for (int d = 7 * j; d < 7 * (j + 1); ++d) CHECK(sa[d] == sb[d]);
      }
      // keep the two instances in lockstep for the next iteration
      b.reset(seed);
      a.reset(seed);
    }
  }
}

TEST_CASE("factor_slice: partition property and declared layouts") {
  auto gunner = make_env("gunner");
  auto s = gunner->reset(3);
  const FactorSpec& spec = gunner->factor_spec();

  auto agent = spec.slice(s, 0);
  CHECK(agent.size() == 6);
  CHECK(agent[0] == s[0]);

  // concatenating all slices in order reconstructs the state
  std::vector<double> rebuilt;
  for (int i = 0; i < spec.count(); ++i) {
    auto part = spec.slice(s, i);
    rebuilt.insert(rebuilt.end(), part.begin(), part.end());
  }
  CHECK(rebuilt == s);

  auto nav = make_env("pointnav");
  auto ns = nav->reset(3);
  CHECK(nav->factor_spec().slice(ns, 0) == ns);

  CHECK_THROWS_AS(spec.factor(3), ContractError);
  CHECK_THROWS_AS(spec.factor(-1), ContractError);
}

TEST_CASE("determinism: same seed and action sequence give identical trajectories") {
  for (const char* id : {"gunner", "multiparticle-mini", "pointnav"}) {
    auto run = [&](uint64_t seed) {
      auto env = make_env(id);
      env->reset(seed);
      Rng rng(99);
      std::vector<double> trace;
      for (int t = 0; t < 60; ++t) {
        std::vector<double> a(env->action_dim());
        for (auto& x : a) x = rng.uniform(-1, 1);
        auto step = env->step(a);
        trace.insert(trace.end(), step.next_state.begin(), step.next_state.end());
        if (step.done) env->reset(seed + 1);
      }
      return trace;
    };
    CHECK(run(7) == run(7));
  }
}

TEST_CASE("episode terminates after the configured length") {
  auto env = make_env("multiparticle-mini");
  env->reset(0);
  std::vector<double> zero(env->action_dim(), 0.0);
  for (int t = 0; t < 49; ++t) CHECK_FALSE(env->step(zero).done);
  CHECK(env->step(zero).done);
}

TEST_CASE("tasks: seq rewards +1 for the correct station, -1 otherwise") {
  auto setup = make_task_setup("seq-easy", "multiparticle-mini");
  auto s0 = setup.env->reset(11);
  Rng rng(42);
  setup.task->reset(s0, rng);

  // decode the first expected station from the instruction encoding
  auto instr = setup.task->instruction();
  const int m = 3;
  const int first = static_cast<int>(std::lround(instr[0] * m)) - 1;
  REQUIRE(first >= 0);
  REQUIRE(first < m);

  auto prev = s0;
  auto next = s0;
  next[7 * first + 4] = 1.0;  // rising edge on the correct station
  CHECK(setup.task->reward(prev, {}, next) == doctest::Approx(1.0));

  const int wrong = (first + 1) % m;
  auto instr2 = setup.task->instruction();
  const int second = static_cast<int>(std::lround(instr2[1] * m)) - 1;
  if (wrong != second) {
    auto bad = s0;
    bad[7 * wrong + 4] = 1.0;
    CHECK(setup.task->reward(prev, {}, bad) == doctest::Approx(-1.0));
  }
}

TEST_CASE("tasks: fp delivers a negative reward on poison stations") {
  auto setup = make_task_setup("fp-difficult", "multiparticle");
  auto s0 = setup.env->reset(3);
  // find a seed whose flags contain at least one poison entry
  int poison = -1;
  for (uint64_t seed = 0; seed < 20 && poison < 0; ++seed) {
    Rng rng(seed);
    setup.task->reset(s0, rng);
    auto flags = setup.task->instruction();
    for (int k = 0; k < 10; ++k)
      if (flags[k] == -1.0) {
        poison = k;
        break;
      }
  }
  REQUIRE(poison >= 0);
  auto next = s0;
  next[7 * poison + 4] = 1.0;
  CHECK(setup.task->reward(s0, {}, next) == doctest::Approx(-1.0));
}

TEST_CASE("tasks: pointnav-goal pays 10 on reaching the goal") {
  auto setup = make_task_setup("pointnav-goal", "pointnav");
  auto s0 = setup.env->reset(2);
  Rng rng(5);
  setup.task->reset(s0, rng);
  // the instruction exposes the goal; standing on it pays out
  auto instr = setup.task->instruction();
  std::vector<double> at_goal = {instr[0] * 10.0, instr[1] * 10.0, 0.0, 0.0};
  CHECK(setup.task->reward(s0, {}, at_goal) == doctest::Approx(10.0));
  // a new goal is sampled afterwards
  auto instr2 = setup.task->instruction();
  const bool moved = instr2[0] != instr[0] || instr2[1] != instr[1];
  CHECK(moved);
}

TEST_CASE("tasks: gunner hit counter delta is the reward") {
  auto setup = make_task_setup("gunner-unlim", "gunner");
  auto s0 = setup.env->reset(0);
  Rng rng(0);
  setup.task->reset(s0, rng);
  auto next = s0;
  next[15] = s0[15] + 1.0;
  CHECK(setup.task->reward(s0, {}, next) == doctest::Approx(1.0));
  CHECK(setup.task->reward(s0, {}, s0) == doctest::Approx(0.0));
}

TEST_CASE("tasks: unknown task name is rejected") {
  auto env = make_env("pointnav");
  CHECK_THROWS_AS(make_task("jolly-jumper", *env), ConfigError);
}

TEST_CASE("tasks: task/env mismatch is rejected") {
  auto env = make_env("pointnav");
  CHECK_THROWS_AS(make_task("seq-easy", *env), ConfigError);
}

TEST_CASE("trajectory dump: stable line-delimited format") {
  TrajectoryRecord rec;
  rec.episode = 2;
  rec.t = 7;
  rec.transition.s = {0.5, -1.0};
  rec.transition.a = {0.25};
  rec.transition.s_next = {0.75, -1.0};
  rec.transition.z = {1.0, 0.0};
  rec.transition.task_reward = 0.125;

  std::ostringstream out;
  write_trajectories(out, {rec});
  CHECK(out.str() ==
        "{\"a\":[0.25],\"episode\":2,\"s\":[0.5,-1.0],\"s_next\":[0.75,-1.0],"
        "\"t\":7,\"task_reward\":0.125,\"z\":[1.0,0.0]}\n");
}
