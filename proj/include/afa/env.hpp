#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "afa/core.hpp"
#include "json.hpp"

namespace afa::env {

/// Maps a (terminal) state to a predicted label. The classifier behind it is
/// frozen; the environment never trains it.
using LabelFn = std::function<int(const AcquisitionState&)>;

struct RewardSpec {
  double lambda = 0.0;  // cost coefficient, >= 0
  void validate() const;
};

struct StepResult {
  AcquisitionState next;
  double reward = 0.0;
  bool done = false;
  bool timeout = false;
};

/// Zero-initialized start state.
AcquisitionState reset(const StudyRecord& study);

/// Terminate is always valid; Acquire(i) is valid iff slot i is not yet
/// acquired, unless `allow_reselect`.
std::vector<bool> action_mask(const AcquisitionState& state, bool allow_reselect = false);

/// Sum of costs over the SET of acquired slots.
double acquired_cost(const StudyRecord& study, const AcquisitionState& state);

/// Terminal reward: 1(prediction == label) - lambda * acquired cost.
double terminal_reward(bool correct, double lambda, double cost);

/// One MDP transition.
/// - Acquire(i): copy of `state` with row i set to the slot features and
///   mask[i] = true; reward 0. If this brings steps_taken to N+1 the episode
///   times out with reward exactly 0.
/// - Terminate: reward from the classifier's prediction on `state`.
StepResult step(const StudyRecord& study, const AcquisitionState& state, Action action, const RewardSpec& reward,
                const LabelFn& predict, bool allow_reselect = false);

struct TransitionRecord {
  AcquisitionState state;
  Action action = Action::terminate();
  double reward = 0.0;
  AcquisitionState next_state;
  bool done = false;
};

struct EpisodeRecord {
  std::string study_id;
  std::vector<int> actions;  // flat action indices: 0 = Terminate, i + 1 = Acquire(i)
  Mask terminal_mask;
  double reward = 0.0;
  int predicted = -1;  // classifier output on the terminal state, also on timeout
  int label = 0;
  bool timeout = false;

  int acquired_count() const;
};

nlohmann::json to_json(const EpisodeRecord& e);
EpisodeRecord episode_from_json(const nlohmann::json& j);
void write_episodes(const std::filesystem::path& path, const std::vector<EpisodeRecord>& episodes);
std::vector<EpisodeRecord> read_episodes(const std::filesystem::path& path);

}  // namespace afa::env
