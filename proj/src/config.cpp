#include "afa/config.hpp"

#include "afa/json_util.hpp"

namespace afa {

namespace {

nlohmann::json data_to_json(const DataConfig& d) {
  return {{"path", d.path},
          {"n_slots", d.n_slots},
          {"feature_dim", d.feature_dim},
          {"split", {{"train", d.split.train}, {"val", d.split.val}, {"test", d.split.test}}},
          {"split_seed", d.split_seed}};
}

DataConfig data_from_json(const nlohmann::json& j) {
  const std::string ctx = "data";
  json_util::reject_unknown(j, {"path", "n_slots", "feature_dim", "split", "split_seed"}, ctx);
  DataConfig d;
  json_util::read(j, "path", d.path, ctx);
  json_util::read(j, "n_slots", d.n_slots, ctx);
  json_util::read(j, "feature_dim", d.feature_dim, ctx);
  json_util::read(j, "split_seed", d.split_seed, ctx);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    json_util::reject_unknown(s, {"train", "val", "test"}, "data.split");
    json_util::read(s, "train", d.split.train, "data.split");
    json_util::read(s, "val", d.split.val, "data.split");
    json_util::read(s, "test", d.split.test, "data.split");
  }
  return d;
}

nlohmann::json eval_to_json(const EvalConfig& e) {
  return {{"split", e.split}, {"lambdas", e.lambdas}, {"seeds", e.seeds}, {"budgets", e.budgets}};
}

EvalConfig eval_from_json(const nlohmann::json& j) {
  const std::string ctx = "eval";
  json_util::reject_unknown(j, {"split", "lambdas", "seeds", "budgets"}, ctx);
  EvalConfig e;
  json_util::read(j, "split", e.split, ctx);
  json_util::read(j, "lambdas", e.lambdas, ctx);
  json_util::read(j, "seeds", e.seeds, ctx);
  json_util::read(j, "budgets", e.budgets, ctx);
  return e;
}

}  // namespace

void RunConfig::validate() const {
  if (data.n_slots <= 0 || data.feature_dim < 0) throw Error("config", "data.n_slots / data.feature_dim invalid");
  const auto& s = data.split;
  if (s.train < 0 || s.val < 0 || s.test < 0 || std::abs(s.train + s.val + s.test - 1.0) > 1e-9)
    throw Error("config", "data.split fractions must be nonnegative and sum to 1");
  generator.validate();
  classifier.validate();
  agent.validate();
  reward.validate();
  if (eval.split != "train" && eval.split != "val" && eval.split != "test")
    throw Error("config", "eval.split must be one of train, val, test");
  if (eval.seeds.empty()) throw Error("config", "eval.seeds must not be empty");
  for (double l : eval.lambdas) env::RewardSpec{l}.validate();
  if (out_dir.empty()) throw Error("config", "out_dir must not be empty");
}

nlohmann::json to_json(const RunConfig& c) {
  return {{"data", data_to_json(c.data)},
          {"generator", synthgen::spec_to_json(c.generator)},
          {"classifier", classifier::to_json(c.classifier)},
          {"agent", agent::to_json(c.agent)},
          {"reward", {{"lambda", c.reward.lambda}}},
          {"eval", eval_to_json(c.eval)},
          {"seed", c.seed},
          {"out_dir", c.out_dir}};
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  json_util::reject_unknown(j, {"data", "generator", "classifier", "agent", "reward", "eval", "seed", "out_dir"},
                            "config");
  RunConfig c;
  if (j.contains("data")) c.data = data_from_json(j.at("data"));
  if (j.contains("generator")) c.generator = synthgen::spec_from_json(j.at("generator"));
  if (j.contains("classifier")) c.classifier = classifier::config_from_json(j.at("classifier"));
  if (j.contains("agent")) c.agent = agent::config_from_json(j.at("agent"));
  if (j.contains("reward")) {
    json_util::reject_unknown(j.at("reward"), {"lambda"}, "reward");
    json_util::read(j.at("reward"), "lambda", c.reward.lambda, "reward");
  }
  if (j.contains("eval")) c.eval = eval_from_json(j.at("eval"));
  json_util::read(j, "seed", c.seed, "config");
  json_util::read(j, "out_dir", c.out_dir, "config");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) { return run_config_from_json(json_util::read_file(path)); }

void echo_config(const RunConfig& c, const std::filesystem::path& out_dir) {
  json_util::write_file(out_dir / "config.json", to_json(c));
}

const std::vector<StudyRecord>& pick_split(const Splits& splits, const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "val") return splits.val;
  if (name == "test") return splits.test;
  throw Error("config", "unknown split '" + name + "'");
}

}  // namespace afa
