// susd: pretrain factorized skills, train downstream controllers and run the
// evaluation battery. Exit codes: 0 ok, 2 configuration error, 3 divergence.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "susd/config.hpp"
#include "susd/eval.hpp"
#include "susd/hrl.hpp"
#include "susd/trajectory.hpp"
#include "susd/trainer.hpp"

namespace fs = std::filesystem;
using namespace susd;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
};

ExperimentConfig load_config(const CommonArgs& args) {
  return ExperimentConfig::resolve_file(args.config_path, args.overrides);
}

template <typename S>
int run_pretrain_typed(const ExperimentConfig& cfg) {
  const PretrainConfig pc = cfg.pretrain();
  const std::string dir = create_run_dir("pretrain", pc.env_id, pc.seed);
  write_resolved_config(dir, cfg);

  Pretrainer<S> trainer(pc);
  MetricsCsv csv;
  csv.open(dir + "/metrics.csv", trainer.spec().count());

  const int checkpoint_every = cfg.doc().at("trainer").at("checkpoint_every").get<int>();
  std::vector<std::string> artifacts = {"resolved_config.json", "metrics.csv"};
  for (int epoch = 1; epoch <= pc.epochs; ++epoch) {
    EpochMetrics m = trainer.run_epoch();
    csv.append(m);
    if (epoch % std::max(1, checkpoint_every) == 0 && epoch < pc.epochs) {
      const std::string ck = "checkpoint_" + std::to_string(epoch);
      trainer.save_checkpoint(dir + "/" + ck);
      artifacts.push_back(ck);
    }
    if (epoch == 1 || epoch % 10 == 0 || epoch == pc.epochs) {
      std::cout << "epoch " << epoch << "/" << pc.epochs
                << "  mean_R=" << m.mean_intrinsic << "  critic=" << m.sac.critic_loss
                << "  wall=" << m.wall_seconds << "s\n";
    }
  }
  trainer.save_checkpoint(dir + "/final");
  artifacts.push_back("final");
  write_manifest(dir, cfg, artifacts);
  std::cout << "run directory: " << dir << "\n";
  return 0;
}

int run_pretrain(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  if (cfg.trainer_dtype() == "f64") return run_pretrain_typed<double>(cfg);
  return run_pretrain_typed<float>(cfg);
}

template <typename S>
int run_downstream_typed(const ExperimentConfig& cfg, const std::string& checkpoint,
                         const std::string& task, int seeds) {
  const PretrainedModel<S> model = load_pretrained<S>(checkpoint);
  const std::string dir = create_run_dir("downstream", task, cfg.seed());
  write_resolved_config(dir, cfg);

  std::vector<std::vector<CurvePoint>> curves;
  std::vector<std::string> artifacts = {"resolved_config.json"};
  for (int k = 0; k < seeds; ++k) {
    HrlConfig hc = cfg.hrl(task);
    hc.seed = cfg.seed() + static_cast<uint64_t>(k);
    HrlTrainer<S> hrl(&model, hc);
    auto curve = hrl.run(hc.epochs);
    curves.push_back(curve);

    const std::string name = "curve_seed" + std::to_string(hc.seed) + ".csv";
    std::ofstream out(fs::path(dir) / name);
    out << "epoch,mean_return\n";
    for (const auto& p : curve) out << p.epoch << ',' << p.mean_return << '\n';
    artifacts.push_back(name);
    std::cout << "seed " << hc.seed << ": final return "
              << curve.back().mean_return << "\n";
  }

  std::ofstream agg(fs::path(dir) / "aggregate.csv");
  agg << "epoch,mean_return,std_return\n";
  const size_t epochs = curves.front().size();
  for (size_t e = 0; e < epochs; ++e) {
    double sum = 0;
    for (const auto& c : curves) sum += c[e].mean_return;
    const double mean = sum / seeds;
    double var = 0;
    for (const auto& c : curves) var += (c[e].mean_return - mean) * (c[e].mean_return - mean);
    const double sd = seeds > 1 ? std::sqrt(var / (seeds - 1)) : 0.0;
    agg << curves.front()[e].epoch << ',' << mean << ',' << sd << '\n';
  }
  artifacts.push_back("aggregate.csv");
  write_manifest(dir, cfg, artifacts);
  std::cout << "run directory: " << dir << "\n";
  return 0;
}

int run_downstream(const CommonArgs& args, const std::string& checkpoint,
                   const std::string& task, int seeds) {
  const ExperimentConfig cfg = load_config(args);
  if (!fs::exists(fs::path(checkpoint) / "manifest.json"))
    throw ConfigError("checkpoint '" + checkpoint + "' does not exist");
  if (cfg.trainer_dtype() == "f64")
    return run_downstream_typed<double>(cfg, checkpoint, task, seeds);
  return run_downstream_typed<float>(cfg, checkpoint, task, seeds);
}

template <typename S>
int run_eval_typed(const ExperimentConfig& cfg, const std::string& checkpoint,
                   const std::string& which) {
  const PretrainedModel<S> model = load_pretrained<S>(checkpoint);
  const std::string dir = create_run_dir("eval", which, cfg.seed());
  write_resolved_config(dir, cfg);
  std::vector<std::string> artifacts = {"resolved_config.json"};

  if (which == "coverage" || which == "bins") {
    auto env = make_env(model.env_id, model.env_params);
    if (which == "coverage") {
      auto report = state_coverage(model, *env, cfg.coverage_steps(),
                                   cfg.resample_every(), cfg.seed());
      std::ofstream out(fs::path(dir) / "coverage.csv");
      out << "factor,agent,unique_states\n";
      for (size_t i = 0; i < report.factor_names.size(); ++i)
        out << report.factor_names[i] << ',' << (report.agent_factor[i] ? 1 : 0) << ','
            << report.unique_counts[i] << '\n';
      artifacts.push_back("coverage.csv");
      std::cout << "worst agent state coverage: " << report.min_agent
                << "\nmean agent state coverage: " << report.mean_agent << "\n";
    } else {
      auto report = bin_coverage(model, *env, cfg.bins_per_axis(),
                                 cfg.coverage_steps(), cfg.resample_every(), cfg.seed());
      std::ofstream out(fs::path(dir) / "bin_coverage.csv");
      out << "factor,agent,fraction\n";
      for (size_t i = 0; i < report.factor_names.size(); ++i)
        out << report.factor_names[i] << ',' << (report.agent_factor[i] ? 1 : 0) << ','
            << report.fractions[i] << '\n';
      artifacts.push_back("bin_coverage.csv");
      std::cout << "min agent bin coverage: " << report.min_agent
                << "\nmean agent bin coverage: " << report.mean_agent << "\n";
    }
  } else if (which == "decode") {
    auto env = make_env(model.env_id, model.env_params);
    auto report = factor_decode(model, *env, decode_candidates(model.env_id),
                                cfg.decode());
    std::ofstream out(fs::path(dir) / "decode.csv");
    out << "factor,test_mse\n";
    for (size_t i = 0; i < report.factor_names.size(); ++i)
      out << report.factor_names[i] << ',' << report.per_factor_mse[i] << '\n';
    artifacts.push_back("decode.csv");
    std::cout << "chosen hidden size: " << report.chosen_hidden
              << "\nmean test MSE: " << report.mean_mse << "\n";
  } else if (which == "zeroshot") {
    auto report =
        zero_shot_eval(model, cfg.zero_shot_budget(), cfg.zero_shot_seeds(), cfg.seed());
    std::ofstream out(fs::path(dir) / "zeroshot.csv");
    out << "seed_index,total_reward\n";
    for (size_t i = 0; i < report.per_seed_rewards.size(); ++i)
      out << i << ',' << report.per_seed_rewards[i] << '\n';
    artifacts.push_back("zeroshot.csv");
    std::cout << "zero-shot reward: " << report.mean << " +/- " << report.stddev
              << " over " << report.per_seed_rewards.size() << " seeds\n";
  } else {
    throw ConfigError("unknown eval kind '" + which +
                      "' (coverage | bins | decode | zeroshot)");
  }
  write_manifest(dir, cfg, artifacts);
  std::cout << "run directory: " << dir << "\n";
  return 0;
}

int run_eval(const CommonArgs& args, const std::string& checkpoint,
             const std::string& which) {
  const ExperimentConfig cfg = load_config(args);
  if (!fs::exists(fs::path(checkpoint) / "manifest.json"))
    throw ConfigError("checkpoint '" + checkpoint + "' does not exist");
  if (cfg.trainer_dtype() == "f64") return run_eval_typed<double>(cfg, checkpoint, which);
  return run_eval_typed<float>(cfg, checkpoint, which);
}

int run_dump(const CommonArgs& args, const std::string& checkpoint, int episodes,
             const std::string& out_path) {
  const ExperimentConfig cfg = load_config(args);
  const PretrainConfig pc = cfg.pretrain();

  std::vector<TrajectoryRecord> records;
  auto env = make_env(pc.env_id, pc.env_params);
  Rng rng(pc.seed);

  // with a checkpoint: frozen skill policy; without: uniform random actions
  std::unique_ptr<PretrainedModel<float>> model;
  if (!checkpoint.empty()) {
    model = std::make_unique<PretrainedModel<float>>(load_pretrained<float>(checkpoint));
    if (model->env_id != pc.env_id)
      throw ConfigError("checkpoint env '" + model->env_id + "' != configured env '" +
                        pc.env_id + "'");
  }
  const FactorSpec spec = model ? model->spec : env->factor_spec();
  const int skill_dim = model ? model->skill_dim : pc.skill_dim;

  for (int ep = 0; ep < episodes; ++ep) {
    std::vector<double> s = env->reset(rng.next_u64());
    const SkillVector z = sample_skill(pc.skill_mode, spec.count(), skill_dim, rng);
    bool done = false;
    int t = 0;
    while (!done) {
      std::vector<double> a(static_cast<size_t>(env->action_dim()));
      if (model) {
        a = model->act(s, z, true, rng);
      } else {
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
      }
      EnvStep step = env->step(a);
      TrajectoryRecord rec;
      rec.episode = ep;
      rec.t = t;
      rec.transition.s = s;
      rec.transition.a = a;
      rec.transition.s_next = step.next_state;
      rec.transition.z = z.flat();
      rec.transition.task_reward = step.task_reward;
      records.push_back(std::move(rec));
      s = step.next_state;
      done = step.done;
      t += 1;
    }
  }

  if (out_path == "-") {
    write_trajectories(std::cout, records);
  } else {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    write_trajectories(out, records);
    std::cout << "wrote " << records.size() << " records to " << out_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SUSD: structured unsupervised skill discovery toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // let --config / --set appear after the subcommand

  CommonArgs common;
  app.add_option("--config", common.config_path, "JSON config file");
  app.add_option("--set", common.overrides,
                 "dotted-path override, e.g. --set sac.gamma=0.95");

  auto* pretrain = app.add_subcommand("pretrain", "run skill pretraining");
  std::string env_opt, ablation_opt, factors_opt;
  int epochs_opt = -1;
  long long seed_opt = -1;
  pretrain->add_option("--env", env_opt, "environment id");
  pretrain->add_option("--epochs", epochs_opt, "pretraining epochs");
  pretrain->add_option("--seed", seed_opt, "master seed");
  pretrain->add_option("--ablation", ablation_opt, "full | susd-w | susd-wf");
  pretrain->add_option("--factors", factors_opt,
                       "factorization override (gunner-over4 | gunner-under2)");

  auto* downstream = app.add_subcommand("downstream", "train a high-level policy");
  std::string ck_opt, task_opt;
  int seeds_opt = 3;
  downstream->add_option("--checkpoint", ck_opt, "pretrained checkpoint dir")->required();
  downstream->add_option("--task", task_opt, "downstream task id")->required();
  downstream->add_option("--seeds", seeds_opt, "number of seeds");
  downstream->add_option("--seed", seed_opt, "base seed");

  auto* eval_cmd = app.add_subcommand("eval", "run an evaluation protocol");
  std::string which_opt;
  bool desk_scale = false;
  eval_cmd->add_option("--checkpoint", ck_opt, "pretrained checkpoint dir")->required();
  eval_cmd->add_option("--which", which_opt, "coverage | bins | decode | zeroshot")
      ->required();
  eval_cmd->add_flag("--desk-scale", desk_scale, "run the reduced decode protocol");
  eval_cmd->add_option("--seed", seed_opt, "evaluation seed");

  auto* dump = app.add_subcommand("dump-trajectories", "write trajectories as JSONL");
  std::string dump_out = "-";
  int dump_episodes = 1;
  dump->add_option("--env", env_opt, "environment id");
  dump->add_option("--episodes", dump_episodes, "episodes to roll out");
  dump->add_option("--seed", seed_opt, "seed");
  dump->add_option("--checkpoint", ck_opt, "optional policy checkpoint");
  dump->add_option("--out", dump_out, "output path ('-' for stdout)");

  try {
    app.parse(argc, argv);

    if (!env_opt.empty()) common.overrides.push_back("env.id=" + env_opt);
    if (epochs_opt >= 0)
      common.overrides.push_back("trainer.epochs=" + std::to_string(epochs_opt));
    if (seed_opt >= 0) common.overrides.push_back("seed=" + std::to_string(seed_opt));
    if (!ablation_opt.empty())
      common.overrides.push_back("trainer.ablation=" + ablation_opt);
    if (!factors_opt.empty())
      common.overrides.push_back("skills.factorization=" + factors_opt);
    if (desk_scale) common.overrides.push_back("eval.decode_desk_scale=true");

    if (app.got_subcommand(pretrain)) return run_pretrain(common);
    if (app.got_subcommand(downstream))
      return run_downstream(common, ck_opt, task_opt, seeds_opt);
    if (app.got_subcommand(eval_cmd)) return run_eval(common, ck_opt, which_opt);
    if (app.got_subcommand(dump)) return run_dump(common, ck_opt, dump_episodes, dump_out);
    return 2;
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
