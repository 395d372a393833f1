#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "susd/eval.hpp"

using namespace susd;

TEST_CASE("unique-state counting: two-decimal rounding rule") {
  // the reference example: (0.27392337, -0.46042657) rounds to (0.27, -0.46)
  CHECK(count_unique_rounded({{0.27392337, -0.46042657}, {0.27, -0.46}}) == 1);
  CHECK(count_unique_rounded({{0.27392337, -0.46042657}, {0.28, -0.46}}) == 2);
}

TEST_CASE("unique-state counting: frozen agent visits exactly one state") {
  std::vector<std::pair<double, double>> trace(500, {1.234, -3.21});
  CHECK(count_unique_rounded(trace) == 1);
}

TEST_CASE("unique-state counting: handcrafted 3-point trajectory with a collision") {
  // points 1 and 3 coincide after rounding
  std::vector<std::pair<double, double>> trace = {
      {0.101, 0.202}, {0.50, 0.50}, {0.1004, 0.2016}};
  CHECK(count_unique_rounded(trace) == 2);
}

TEST_CASE("unique-state counting: order invariant") {
  Rng rng(1);
  std::vector<std::pair<double, double>> trace;
  for (int i = 0; i < 300; ++i) trace.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
  const int base = count_unique_rounded(trace);
  for (int round = 0; round < 5; ++round) {
    for (int i = static_cast<int>(trace.size()) - 1; i > 0; --i)
      std::swap(trace[static_cast<size_t>(i)],
                trace[static_cast<size_t>(rng.uniform_int(i + 1))]);
    CHECK(count_unique_rounded(trace) == base);
  }
}

TEST_CASE("bin coverage: frozen agent occupies exactly one of 2500 cells") {
  std::vector<std::pair<double, double>> trace(100, {0.7, -2.3});
  CHECK(bin_fraction(trace, -5.0, 5.0, 50) == doctest::Approx(1.0 / 2500));
}

TEST_CASE("bin coverage: sweeping one full row of cells gives 50/2500") {
  std::vector<std::pair<double, double>> trace;
  const double lo = -5.0, hi = 5.0;
  const double w = (hi - lo) / 50;
  for (int c = 0; c < 50; ++c) trace.push_back({lo + (c + 0.5) * w, 0.0});
  CHECK(bin_fraction(trace, lo, hi, 50) == doctest::Approx(50.0 / 2500));
}

TEST_CASE("bin coverage: out-of-bounds positions clip to edge cells") {
  std::vector<std::pair<double, double>> trace = {{-999.0, 0.0}, {-5.0, 0.0}};
  CHECK(bin_fraction(trace, -5.0, 5.0, 50) == doctest::Approx(1.0 / 2500));
  CHECK(bin_fraction({{999.0, 999.0}}, -5.0, 5.0, 50) ==
        doctest::Approx(1.0 / 2500));
}

TEST_CASE("bin coverage: fraction stays within [1/2500, 1]") {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::pair<double, double>> trace;
    const int n = 1 + rng.uniform_int(400);
    for (int i = 0; i < n; ++i)
      trace.push_back({rng.uniform(-6, 6), rng.uniform(-6, 6)});
    const double f = bin_fraction(trace, -5, 5, 50);
    CHECK(f >= 1.0 / 2500);
    CHECK(f <= 1.0);
  }
}

TEST_CASE("coverage report: aggregates run over agent factors only") {
  FactorSpec spec({{"agent0", 0, 2}, {"station", 2, 4}, {"agent1", 4, 6}}, 6);
  std::vector<std::vector<std::pair<double, double>>> traces(3);
  traces[0] = {{0, 0}, {1, 1}, {2, 2}};               // 3 unique
  traces[1] = {{0, 0}, {0, 0}, {0, 0}, {0, 0}};       // 1 unique (ignored: not agent)
  traces[2] = {{0, 0}, {1, 1}};                       // 2 unique
  auto report = coverage_from_traces(traces, spec, 3, 200);
  CHECK(report.unique_counts == std::vector<int>{3, 1, 2});
  CHECK(report.min_agent == 2);
  CHECK(report.mean_agent == doctest::Approx(2.5));
  CHECK(report.agent_factor == std::vector<bool>{true, false, true});
  for (int c : report.unique_counts) CHECK(c >= 1);
  CHECK(report.min_agent <= report.mean_agent);
}

TEST_CASE("decode: identity embedding reconstructs states to near-zero error") {
  Rng rng(3);
  std::vector<std::vector<double>> states;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> s(6);
    for (auto& v : s) v = rng.normal();
    states.push_back(s);
  }
  FactorSpec spec({{"agent0", 0, 3}, {"agent1", 3, 6}}, 6);
  DecodeConfig cfg;
  cfg.epochs = 250;
  cfg.learning_rate = 3e-3;
  cfg.batch_size = 128;
  auto report = decode_from_embedding(
      states, [](const std::vector<double>& s) { return s; }, spec, {16, 24}, cfg);
  CHECK(report.mean_mse < 0.01);
  CHECK(report.per_factor_mse.size() == 2);
  CHECK((report.chosen_hidden == 16 || report.chosen_hidden == 24));
  CHECK(report.train_size == 1600);
  CHECK(report.val_size == 200);
  CHECK(report.test_size == 200);
}

TEST_CASE("decode: constant embedding bottoms out at the per-factor target variance") {
  Rng rng(4);
  std::vector<std::vector<double>> states;
  for (int i = 0; i < 3000; ++i) {
    std::vector<double> s(4);
    s[0] = 2.0 * rng.normal();  // variance 4
    s[1] = rng.normal();        // variance 1
    s[2] = 0.5 * rng.normal();  // variance 0.25
    s[3] = rng.normal();
    states.push_back(s);
  }
  FactorSpec spec({{"agent0", 0, 2}, {"agent1", 2, 4}}, 4);
  DecodeConfig cfg;
  cfg.epochs = 60;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 256;
  auto report = decode_from_embedding(
      states, [](const std::vector<double>&) { return std::vector<double>{1.0}; },
      spec, {8}, cfg);
  // best constant predictor is the mean, so MSE ~ mean of the dim variances
  CHECK(report.per_factor_mse[0] == doctest::Approx((4.0 + 1.0) / 2).epsilon(0.25));
  CHECK(report.per_factor_mse[1] == doctest::Approx((0.25 + 1.0) / 2).epsilon(0.25));
}

TEST_CASE("decode: empty candidate list is rejected") {
  std::vector<std::vector<double>> states(20, std::vector<double>(2, 0.0));
  FactorSpec spec = FactorSpec::single(2);
  CHECK_THROWS_AS(decode_from_embedding(
                      states, [](const std::vector<double>& s) { return s; }, spec,
                      {}, DecodeConfig{}),
                  ContractError);
}

namespace {

PretrainedModel<double> tiny_model(SkillMode mode, uint64_t seed) {
  const std::string dir =
      (std::filesystem::temp_directory_path() / ("susd_eval_model_" +
       std::to_string(seed) + (mode == SkillMode::discrete ? "_d" : "_c"))).string();
  PretrainConfig cfg;
  cfg.env_id = "pointnav";
  cfg.skill_mode = mode;
  cfg.episodes_per_epoch = 1;
  cfg.grad_steps_per_epoch = 2;
  cfg.batch_size = 16;
  cfg.hidden_units = 8;
  cfg.buffer_capacity = 512;
  cfg.seed = seed;
  Pretrainer<double> tr(cfg);
  tr.run_epoch();
  std::filesystem::remove_all(dir);
  tr.save_checkpoint(dir);
  auto model = load_pretrained<double>(dir);
  std::filesystem::remove_all(dir);
  return model;
}

}  // namespace

TEST_CASE("state_coverage: works end to end on an untrained checkpoint") {
  auto model = tiny_model(SkillMode::continuous, 41);
  auto env = make_env("pointnav");
  auto report = state_coverage(model, *env, 600, 200, 7);
  REQUIRE(report.unique_counts.size() == 1);
  CHECK(report.unique_counts[0] >= 1);
  CHECK(report.min_agent <= report.mean_agent + 1e-12);
  CHECK(report.steps == 600);

  // determinism across runs
  auto env2 = make_env("pointnav");
  auto report2 = state_coverage(model, *env2, 600, 200, 7);
  CHECK(report.unique_counts == report2.unique_counts);
}

TEST_CASE("zero_shot_eval: report shape and determinism") {
  auto model = tiny_model(SkillMode::continuous, 42);
  auto report = zero_shot_eval(model, 400, 8, 5);
  CHECK(report.per_seed_rewards.size() == 8);
  CHECK(report.budget == 400);
  auto report2 = zero_shot_eval(model, 400, 8, 5);
  CHECK(report.per_seed_rewards == report2.per_seed_rewards);
}

TEST_CASE("zero_shot_eval: discrete checkpoints are rejected") {
  auto model = tiny_model(SkillMode::discrete, 43);
  CHECK_THROWS_AS(zero_shot_eval(model, 100, 2, 0), ContractError);
}
