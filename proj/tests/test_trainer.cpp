#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "susd/trainer.hpp"

using namespace susd;

namespace {

PretrainConfig tiny_config() {
  PretrainConfig cfg;
  cfg.env_id = "multiparticle-mini";
  cfg.epochs = 3;
  cfg.episodes_per_epoch = 2;
  cfg.grad_steps_per_epoch = 4;
  cfg.batch_size = 32;
  cfg.hidden_units = 16;
  cfg.hidden_layers = 2;
  cfg.buffer_capacity = 4096;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("collect_episode: full length, constant skill, deterministic") {
  auto cfg = tiny_config();
  Pretrainer<double> tr(cfg);
  Rng zrng(1);
  const auto z = sample_skill(SkillMode::continuous, tr.spec().count(), 2, zrng);
  auto traj = tr.collect_episode(z);
  CHECK(traj.size() == 50);  // mini episode length
  CHECK(traj.back().done);
  for (const auto& t : traj) {
    CHECK(t.z == z.flat());
    CHECK(t.task_reward == 0.0);
  }

  Pretrainer<double> tr2(cfg);
  auto traj2 = tr2.collect_episode(z);
  REQUIRE(traj2.size() == traj.size());
  for (size_t i = 0; i < traj.size(); ++i) {
    CHECK(traj[i].s == traj2[i].s);
    CHECK(traj[i].a == traj2[i].a);
    CHECK(traj[i].stored_intrinsic == traj2[i].stored_intrinsic);
  }
}

TEST_CASE("pretrain_epoch: phases run in algorithm order") {
  auto cfg = tiny_config();
  Pretrainer<double> tr(cfg);
  tr.run_epoch();
  const auto& phases = tr.last_epoch_phases();
  std::vector<std::string> want(cfg.episodes_per_epoch, "collect");
  want.insert(want.end(), {"density", "phi", "lambda", "sac"});
  CHECK(phases == want);
}

TEST_CASE("pretrain_epoch: SUSD-w pins curiosity weights to one and skips the fit") {
  auto cfg = tiny_config();
  cfg.ablation = Ablation::no_weighting;
  Pretrainer<double> tr(cfg);
  auto m = tr.run_epoch();
  CHECK(m.mean_weight == 1.0);
  for (const auto& phase : tr.last_epoch_phases()) CHECK(phase != "density");
}

TEST_CASE("pretrain_epoch: SUSD-wf forces a single factor over the full state") {
  auto cfg = tiny_config();
  cfg.ablation = Ablation::no_weighting_no_factorization;
  Pretrainer<double> tr(cfg);
  CHECK(tr.spec().count() == 1);
  CHECK(tr.spec().factor(0).dim() == 21);
  CHECK(tr.skill_dim_total() == 2);

  auto m = tr.run_epoch();
  CHECK(m.mean_weight == 1.0);
  CHECK(m.mean_dphi_norm.size() == 1);

  // R reduces to the single-factor reward
  Rng zrng(2);
  auto z = sample_skill(SkillMode::continuous, 1, 2, zrng);
  auto traj = tr.collect_episode(z);
  const auto& t = traj.front();
  CHECK(total_intrinsic_reward(tr.bank(), tr.spec(), {1.0}, t.s, t.s_next, z) ==
        doctest::Approx(factor_reward(tr.bank(), tr.spec(), t.s, t.s_next, z, 0)));
}

TEST_CASE("pretrain: full run is deterministic and metrics are monotone") {
  auto run = [] {
    auto cfg = tiny_config();
    Pretrainer<double> tr(cfg);
    std::vector<EpochMetrics> rows;
    for (int e = 0; e < cfg.epochs; ++e) rows.push_back(tr.run_epoch());
    return rows;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == 3);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].epoch == static_cast<int>(i) + 1);
    CHECK(a[i].mean_dphi_norm == b[i].mean_dphi_norm);
    CHECK(a[i].lambda == b[i].lambda);
    CHECK(a[i].mean_intrinsic == b[i].mean_intrinsic);
    CHECK(a[i].sac.critic_loss == b[i].sac.critic_loss);
    for (double l : a[i].lambda) CHECK(l >= 0.0);
  }
}

TEST_CASE("pretrain: float instantiation runs and stays finite") {
  auto cfg = tiny_config();
  cfg.epochs = 1;
  Pretrainer<float> tr(cfg);
  auto m = tr.run_epoch();
  CHECK(std::isfinite(m.mean_intrinsic));
  CHECK(std::isfinite(m.sac.critic_loss));
  for (double v : m.mean_dphi_norm) CHECK(std::isfinite(v));
}

TEST_CASE("checkpoint: save and reload reproduce the policy and embeddings") {
  auto cfg = tiny_config();
  Pretrainer<double> tr(cfg);
  tr.run_epoch();

  const std::string dir =
      (std::filesystem::temp_directory_path() / "susd_trainer_ck").string();
  std::filesystem::remove_all(dir);
  tr.save_checkpoint(dir);
  auto model = load_pretrained<double>(dir);

  CHECK(model.env_id == "multiparticle-mini");
  CHECK(model.spec.count() == 3);
  CHECK(model.skill_dim == 2);
  for (int i = 0; i < 3; ++i)
    for (size_t l = 0; l < model.bank.nets[i].layer_count(); ++l)
      CHECK(model.bank.nets[i].weights[l].v == tr.bank().nets[i].weights[l].v);

  Rng zrng(3);
  auto z = sample_skill(SkillMode::continuous, 3, 2, zrng);
  std::vector<double> s(21, 0.25);
  std::vector<double> obs = s;
  auto zf = z.flat();
  obs.insert(obs.end(), zf.begin(), zf.end());
  Rng r1(0), r2(0);
  CHECK(model.sac->act(obs, false, r1) == tr.sac().act(obs, false, r2));
  std::filesystem::remove_all(dir);
}

TEST_CASE("metrics csv: one well-formed row per epoch") {
  auto cfg = tiny_config();
  cfg.epochs = 2;
  Pretrainer<double> tr(cfg);
  const std::string path =
      (std::filesystem::temp_directory_path() / "susd_metrics_test.csv").string();
  MetricsCsv csv;
  csv.open(path, tr.spec().count());
  for (int e = 0; e < cfg.epochs; ++e) csv.append(tr.run_epoch());

  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);  // header + 2 rows
  CHECK(lines[0].rfind("epoch,dphi_norm_0", 0) == 0);
  CHECK(lines[1][0] == '1');
  CHECK(lines[2][0] == '2');
  std::remove(path.c_str());
}

TEST_CASE("resolve_factor_spec: overrides and validation") {
  auto gunner = make_env("gunner");
  auto over = resolve_factor_spec(*gunner, Ablation::full, "gunner-over4");
  CHECK(over.count() == 4);
  CHECK(over.factor(0).dim() == 3);
  auto under = resolve_factor_spec(*gunner, Ablation::full, "gunner-under2");
  CHECK(under.count() == 2);
  CHECK(under.factor(0).dim() == 12);

  auto nav = make_env("pointnav");
  CHECK_THROWS_AS(resolve_factor_spec(*nav, Ablation::full, "gunner-over4"),
                  ConfigError);
  CHECK_THROWS_AS(resolve_factor_spec(*nav, Ablation::full, "no-such-split"),
                  ConfigError);
}
