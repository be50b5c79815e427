#include "afa/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace afa::env {

void RewardSpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("config", "reward lambda must be finite and >= 0");
}

AcquisitionState reset(const StudyRecord& study) {
  AcquisitionState s;
  s.mask.assign(study.n_slots(), false);
  s.features = FeatureMatrix::Zero(study.n_slots(), study.feature_dim());
  return s;
}

std::vector<bool> action_mask(const AcquisitionState& state, bool allow_reselect) {
  std::vector<bool> valid(state.mask.size() + 1, true);
  if (!allow_reselect)
    for (std::size_t i = 0; i < state.mask.size(); ++i) valid[i + 1] = !state.mask[i];
  return valid;
}

double acquired_cost(const StudyRecord& study, const AcquisitionState& state) {
  double cost = 0.0;
  for (int i = 0; i < state.n_slots(); ++i)
    if (state.mask[i]) cost += study.slots[i].cost;
  return cost;
}

double terminal_reward(bool correct, double lambda, double cost) { return (correct ? 1.0 : 0.0) - lambda * cost; }

StepResult step(const StudyRecord& study, const AcquisitionState& state, Action action, const RewardSpec& reward,
                const LabelFn& predict, bool allow_reselect) {
  const int n = study.n_slots();
  if (state.terminal || state.steps_taken >= n + 1) throw Error("env", "step called on a finished episode");
  if (state.n_slots() != n || state.features.cols() != study.feature_dim())
    throw Error("shape", "state does not match study '" + study.study_id + "'");

  StepResult out;
  out.next = state;
  out.next.steps_taken = state.steps_taken + 1;

  if (action.is_terminate()) {
    const int predicted = predict(state);
    out.reward = terminal_reward(predicted == study.label, reward.lambda, acquired_cost(study, state));
    out.done = true;
    out.next.terminal = true;
    return out;
  }

  const int slot = action.slot();
  if (slot >= n) throw Error("action", "acquire index " + std::to_string(slot) + " out of range for N=" + std::to_string(n));
  if (state.mask[slot] && !allow_reselect)
    throw Error("action", "slot " + std::to_string(slot) + " already acquired (re-selection disabled)");
  out.next.mask[slot] = true;
  out.next.features.row(slot) = study.slots[slot].features.transpose();
  if (out.next.steps_taken == n + 1) {
    out.done = true;
    out.timeout = true;
    out.next.terminal = true;
  }
  return out;
}

int EpisodeRecord::acquired_count() const {
  return static_cast<int>(std::count(terminal_mask.begin(), terminal_mask.end(), true));
}

nlohmann::json to_json(const EpisodeRecord& e) {
  std::vector<int> mask(e.terminal_mask.begin(), e.terminal_mask.end());
  return {{"study_id", e.study_id}, {"actions", e.actions}, {"terminal_mask", mask},
          {"reward", e.reward},     {"predicted", e.predicted}, {"label", e.label},
          {"timeout", e.timeout}};
}

EpisodeRecord episode_from_json(const nlohmann::json& j) {
  EpisodeRecord e;
  e.study_id = j.at("study_id").get<std::string>();
  e.actions = j.at("actions").get<std::vector<int>>();
  for (int m : j.at("terminal_mask").get<std::vector<int>>()) e.terminal_mask.push_back(m != 0);
  e.reward = j.at("reward").get<double>();
  e.predicted = j.at("predicted").get<int>();
  e.label = j.at("label").get<int>();
  e.timeout = j.value("timeout", false);
  return e;
}

void write_episodes(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  for (const auto& e : episodes) out << to_json(e).dump() << '\n';
}

std::vector<EpisodeRecord> read_episodes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  std::vector<EpisodeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error("io", path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace afa::env
