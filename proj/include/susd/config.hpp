#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "susd/eval.hpp"
#include "susd/hrl.hpp"
#include "susd/trainer.hpp"

namespace susd {

inline constexpr const char* kCodeVersion = "0.1.0";

// Experiment configuration: a JSON document with sections env, skills,
// density, sac, trainer, hrl, eval. Every field has a default; unknown keys
// are rejected with their dotted path. The resolved document is written next
// to run outputs for provenance.
class ExperimentConfig {
 public:
  static nlohmann::json defaults();

  // defaults <- file document <- dotted-path overrides ("sac.gamma=0.95").
  static ExperimentConfig resolve(const nlohmann::json& file_doc,
                                  const std::vector<std::string>& overrides = {});
  static ExperimentConfig resolve_file(const std::string& path,
                                       const std::vector<std::string>& overrides = {});

  const nlohmann::json& doc() const { return doc_; }
  uint64_t hash() const;
  std::string hash_hex() const;

  // typed views
  PretrainConfig pretrain() const;
  HrlConfig hrl(const std::string& task_id) const;
  DecodeConfig decode() const;
  std::string env_id() const { return doc_.at("env").at("id").get<std::string>(); }
  uint64_t seed() const { return doc_.at("seed").get<uint64_t>(); }
  std::string trainer_dtype() const {
    return doc_.at("trainer").at("dtype").get<std::string>();
  }

  int coverage_steps() const { return doc_.at("eval").at("coverage_steps").get<int>(); }
  int resample_every() const { return doc_.at("eval").at("resample_every").get<int>(); }
  int bins_per_axis() const { return doc_.at("eval").at("bins_per_axis").get<int>(); }
  int zero_shot_budget() const {
    return doc_.at("eval").at("zero_shot_budget").get<int>();
  }
  int zero_shot_seeds() const { return doc_.at("eval").at("zero_shot_seeds").get<int>(); }

 private:
  nlohmann::json doc_;
};

// Decoder hidden-size candidates per environment (cross-validated choice).
std::vector<int> decode_candidates(const std::string& env_id);

// Run directories and manifests.
std::string output_root();  // $SUSD_RUN_ROOT or ./runs
std::string create_run_dir(const std::string& kind, const std::string& tag,
                           uint64_t seed);
void write_manifest(const std::string& run_dir, const ExperimentConfig& cfg,
                    const std::vector<std::string>& artifacts);
void write_resolved_config(const std::string& run_dir, const ExperimentConfig& cfg);

}  // namespace susd
