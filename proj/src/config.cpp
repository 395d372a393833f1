#include "susd/config.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace susd {

namespace fs = std::filesystem;

nlohmann::json ExperimentConfig::defaults() {
  return {
      {"seed", 0},
      {"env",
       {{"id", "multiparticle-mini"},
        {"agents", 10},           // Multi-Particle agent count at full scale
        {"episode_length", 0}}},  // 0 = environment default
      {"skills",
       {{"n_factors", 0},  // 0 = derived from the environment factorization
        {"skill_dim", 2},
        {"mode", "continuous"},
        {"factorization", ""},  // "", "gunner-over4", "gunner-under2"
        {"init_lambda", 3000.0},
        {"slack_eps", 1e-6}}},
      {"density", {{"logvar_min", -10.0}, {"logvar_max", 4.0}}},
      {"sac",
       {{"gamma", 0.99},
        {"tau", 0.995},
        {"init_alpha", 0.1},
        {"batch_size", 256},
        {"buffer_capacity", 100000},  // paper scale: 1e6
        {"relabel", true}}},
      {"trainer",
       {{"epochs", 300},
        {"episodes_per_epoch", 8},
        {"grad_steps_per_epoch", 50},
        {"learning_rate", 1e-4},
        {"hidden_units", 256},  // paper scale: 1024
        {"hidden_layers", 2},
        {"ablation", "full"},
        {"dtype", "f32"},
        {"checkpoint_every", 100}}},
      {"hrl",
       {{"k_steps", 5},
        {"skill_box", 1.5},
        {"epochs", 400},  // paper scale: 1e4
        {"episodes_per_epoch", 1},
        {"grad_steps_per_epoch", 50}}},
      {"eval",
       {{"coverage_steps", 20000},
        {"resample_every", 200},
        {"bins_per_axis", 50},
        {"decode_steps", 100000},
        {"decode_desk_scale", false},
        {"decode_epochs", 100},
        {"decode_batch", 1024},
        {"decode_lr", 1e-4},
        {"zero_shot_budget", 20000},
        {"zero_shot_seeds", 8}}},
  };
}

namespace {

void merge_checked(nlohmann::json& base, const nlohmann::json& patch,
                   const std::string& path) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key_path = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key()))
      throw ConfigError("unknown config key '" + key_path + "'");
    if (base[it.key()].is_object() && it.value().is_object()) {
      merge_checked(base[it.key()], it.value(), key_path);
    } else if (base[it.key()].is_object() != it.value().is_object()) {
      throw ConfigError("config key '" + key_path + "' has the wrong structure");
    } else {
      base[it.key()] = it.value();
    }
  }
}

nlohmann::json parse_override_value(const std::string& text) {
  auto parsed = nlohmann::json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  return nlohmann::json(text);  // fall back to a plain string
}

void apply_override(nlohmann::json& doc, const std::string& expr) {
  const auto eq = expr.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + expr + "' must look like section.key=value");
  const std::string path = expr.substr(0, eq);
  const nlohmann::json value = parse_override_value(expr.substr(eq + 1));

  nlohmann::json* node = &doc;
  std::string walked;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  if (parts.empty()) throw ConfigError("override '" + expr + "' has an empty path");
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    walked = walked.empty() ? parts[i] : walked + "." + parts[i];
    if (!node->contains(parts[i]) || !(*node)[parts[i]].is_object())
      throw ConfigError("unknown config section '" + walked + "'");
    node = &(*node)[parts[i]];
  }
  const std::string& leaf = parts.back();
  walked = walked.empty() ? leaf : walked + "." + leaf;
  if (!node->contains(leaf)) throw ConfigError("unknown config key '" + walked + "'");
  if ((*node)[leaf].is_object())
    throw ConfigError("config key '" + walked + "' is a section, not a value");
  (*node)[leaf] = value;
}

}  // namespace

ExperimentConfig ExperimentConfig::resolve(const nlohmann::json& file_doc,
                                           const std::vector<std::string>& overrides) {
  ExperimentConfig cfg;
  cfg.doc_ = defaults();
  if (!file_doc.is_null()) {
    if (!file_doc.is_object()) throw ConfigError("config document must be an object");
    merge_checked(cfg.doc_, file_doc, "");
  }
  for (const auto& expr : overrides) apply_override(cfg.doc_, expr);

  // cheap validation of enumerated fields
  parse_ablation(cfg.doc_.at("trainer").at("ablation").get<std::string>());
  const std::string mode = cfg.doc_.at("skills").at("mode").get<std::string>();
  if (mode != "continuous" && mode != "discrete")
    throw ConfigError("skills.mode must be continuous or discrete");
  const std::string dtype = cfg.doc_.at("trainer").at("dtype").get<std::string>();
  if (dtype != "f32" && dtype != "f64")
    throw ConfigError("trainer.dtype must be f32 or f64");
  return cfg;
}

ExperimentConfig ExperimentConfig::resolve_file(const std::string& path,
                                                const std::vector<std::string>& overrides) {
  if (path.empty()) return resolve(nlohmann::json(), overrides);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
  return resolve(doc, overrides);
}

uint64_t ExperimentConfig::hash() const {
  const std::string canon = doc_.dump();
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

PretrainConfig ExperimentConfig::pretrain() const {
  PretrainConfig p;
  const auto& env = doc_.at("env");
  const auto& skills = doc_.at("skills");
  const auto& sac = doc_.at("sac");
  const auto& trainer = doc_.at("trainer");
  p.env_id = env.at("id").get<std::string>();
  p.env_params.agents = env.at("agents").get<int>();
  p.env_params.episode_length = env.at("episode_length").get<int>();
  p.skill_dim = skills.at("skill_dim").get<int>();
  p.skill_mode = skills.at("mode").get<std::string>() == "discrete"
                     ? SkillMode::discrete
                     : SkillMode::continuous;
  p.factors_override = skills.at("factorization").get<std::string>();
  p.init_lambda = skills.at("init_lambda").get<double>();
  p.slack_eps = skills.at("slack_eps").get<double>();
  p.gamma = sac.at("gamma").get<double>();
  p.tau = sac.at("tau").get<double>();
  p.init_alpha = sac.at("init_alpha").get<double>();
  p.batch_size = sac.at("batch_size").get<int>();
  p.buffer_capacity = sac.at("buffer_capacity").get<size_t>();
  p.relabel = sac.at("relabel").get<bool>();
  p.epochs = trainer.at("epochs").get<int>();
  p.episodes_per_epoch = trainer.at("episodes_per_epoch").get<int>();
  p.grad_steps_per_epoch = trainer.at("grad_steps_per_epoch").get<int>();
  p.learning_rate = trainer.at("learning_rate").get<double>();
  p.hidden_units = trainer.at("hidden_units").get<int>();
  p.hidden_layers = trainer.at("hidden_layers").get<int>();
  p.ablation = parse_ablation(trainer.at("ablation").get<std::string>());
  p.seed = doc_.at("seed").get<uint64_t>();

  const int want_factors = skills.at("n_factors").get<int>();
  if (want_factors > 0) {
    auto env_obj = make_env(p.env_id, p.env_params);
    const FactorSpec spec = resolve_factor_spec(*env_obj, p.ablation, p.factors_override);
    if (spec.count() != want_factors)
      throw ConfigError("skills.n_factors = " + std::to_string(want_factors) +
                        " does not match the resolved factorization (N = " +
                        std::to_string(spec.count()) + ")");
  }
  return p;
}

HrlConfig ExperimentConfig::hrl(const std::string& task_id) const {
  HrlConfig h;
  const auto& hrl_doc = doc_.at("hrl");
  const auto& sac = doc_.at("sac");
  const auto& trainer = doc_.at("trainer");
  h.task_id = task_id;
  h.k_steps = hrl_doc.at("k_steps").get<int>();
  h.skill_box = hrl_doc.at("skill_box").get<double>();
  h.epochs = hrl_doc.at("epochs").get<int>();
  h.episodes_per_epoch = hrl_doc.at("episodes_per_epoch").get<int>();
  h.grad_steps_per_epoch = hrl_doc.at("grad_steps_per_epoch").get<int>();
  h.batch_size = sac.at("batch_size").get<int>();
  h.buffer_capacity = sac.at("buffer_capacity").get<size_t>();
  h.gamma = sac.at("gamma").get<double>();
  h.tau = sac.at("tau").get<double>();
  h.init_alpha = sac.at("init_alpha").get<double>();
  h.learning_rate = trainer.at("learning_rate").get<double>();
  h.hidden_units = trainer.at("hidden_units").get<int>();
  h.hidden_layers = trainer.at("hidden_layers").get<int>();
  h.seed = doc_.at("seed").get<uint64_t>();
  return h;
}

DecodeConfig ExperimentConfig::decode() const {
  DecodeConfig d;
  const auto& ev = doc_.at("eval");
  d.steps = ev.at("decode_desk_scale").get<bool>() ? 20000
                                                   : ev.at("decode_steps").get<int>();
  d.resample_every = ev.at("resample_every").get<int>();
  d.epochs = ev.at("decode_epochs").get<int>();
  d.learning_rate = ev.at("decode_lr").get<double>();
  d.batch_size = ev.at("decode_batch").get<int>();
  d.seed = doc_.at("seed").get<uint64_t>();
  return d;
}

std::vector<int> decode_candidates(const std::string& env_id) {
  if (env_id.rfind("multiparticle", 0) == 0)
    return {30, 35, 40, 45, 50, 55, 60, 65};
  if (env_id == "gunner") return {10, 12, 14, 16};
  if (env_id == "pointnav") return {8, 12, 16};
  throw ConfigError("no decoder candidates for environment '" + env_id + "'");
}

std::string output_root() {
  if (const char* root = std::getenv("SUSD_RUN_ROOT"); root && *root) return root;
  return "runs";
}

std::string create_run_dir(const std::string& kind, const std::string& tag,
                           uint64_t seed) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_utc);

  const fs::path root = output_root();
  std::string base = kind + "-" + tag + "-s" + std::to_string(seed) + "-" + stamp;
  fs::path dir = root / base;
  for (int k = 2; fs::exists(dir); ++k) dir = root / (base + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir.string();
}

void write_manifest(const std::string& run_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& artifacts) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char stamp[40];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);

  nlohmann::json manifest = {{"config_hash", cfg.hash_hex()},
                             {"seed", cfg.seed()},
                             {"code_version", kCodeVersion},
                             {"start_time", stamp},
                             {"artifacts", artifacts}};
  std::ofstream out(fs::path(run_dir) / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + run_dir);
  out << manifest.dump(2) << "\n";
}

void write_resolved_config(const std::string& run_dir, const ExperimentConfig& cfg) {
  std::ofstream out(fs::path(run_dir) / "resolved_config.json");
  if (!out) throw IoError("cannot write resolved config in " + run_dir);
  out << cfg.doc().dump(2) << "\n";
}

}  // namespace susd
