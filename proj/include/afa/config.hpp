#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "afa/agent.hpp"
#include "afa/classifier.hpp"
#include "afa/core.hpp"
#include "afa/env.hpp"
#include "afa/synthgen.hpp"
#include "json.hpp"

namespace afa {

struct DataConfig {
  std::string path;      // studies.jsonl
  int n_slots = 4;
  int feature_dim = 0;   // 0: take it from the first record
  SplitFractions split;
  std::uint64_t split_seed = 1;
};

struct EvalConfig {
  std::string split = "test";  // train | val | test
  std::vector<double> lambdas{0.001, 0.01, 0.1, 0.2, 0.25};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  /// Budgets for the random-mask curve; empty means "the sweep's own counts".
  std::vector<double> budgets;
};

/// Every section optional; missing fields keep the module defaults.
struct RunConfig {
  DataConfig data;
  synthgen::GeneratorSpec generator;
  classifier::ClassifierConfig classifier;
  agent::AgentConfig agent;
  env::RewardSpec reward{0.05};
  EvalConfig eval;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Unknown keys anywhere are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

/// Writes the fully defaulted config as <out_dir>/config.json.
void echo_config(const RunConfig& c, const std::filesystem::path& out_dir);

const std::vector<StudyRecord>& pick_split(const Splits& splits, const std::string& name);

}  // namespace afa
