#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "afa/classifier.hpp"
#include "afa/core.hpp"
#include "afa/env.hpp"
#include "afa/neural/grad_check.hpp"
#include "afa/neural/layers.hpp"
#include "json.hpp"

namespace afa::agent {

using nn::Mat;
using nn::ParamRefs;

struct AgentConfig {
  double gamma = 1.0;
  int epochs = 50;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.6;  // of all training episodes
  int replay_capacity = 50000;
  int batch_size = 64;
  int target_sync = 500;  // gradient steps between target refreshes
  double learning_rate = 1e-3;
  double weight_decay = 0.0;  // decoupled (AdamW-style)
  std::vector<int> hidden{256, 256};
  bool allow_reselect = false;
  bool append_mask = false;  // append explicit mask bits to the flat state

  void validate() const;
};

nlohmann::json to_json(const AgentConfig& c);
AgentConfig config_from_json(const nlohmann::json& j);

/// Fully connected value network: flat state -> N+1 action values, ReLU
/// between layers.
template <typename Scalar>
class QNetwork {
 public:
  struct Cache {
    std::vector<typename nn::Dense<Scalar>::Cache> layers;
    std::vector<Mat<Scalar>> pre;  // pre-activations of hidden layers
  };

  QNetwork() = default;
  QNetwork(int input_dim, std::vector<int> hidden, int n_actions, std::uint64_t seed) {
    int in = input_dim;
    for (std::size_t l = 0; l < hidden.size(); ++l) {
      layers_.emplace_back("fc" + std::to_string(l), in, hidden[l]);
      in = hidden[l];
    }
    layers_.emplace_back("fc" + std::to_string(hidden.size()), in, n_actions);
    nn::Initializer init(seed);
    for (auto& l : layers_) l.init(init);
  }

  Mat<Scalar> forward(const Mat<Scalar>& x, Cache* cache = nullptr) const {
    if (cache) {
      cache->layers.resize(layers_.size());
      cache->pre.resize(layers_.size() - 1);
    }
    Mat<Scalar> h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      h = layers_[l].forward(h, cache ? &cache->layers[l] : nullptr);
      if (l + 1 < layers_.size()) {
        if (cache) cache->pre[l] = h;
        h = nn::relu(h);
      }
    }
    return h;
  }

  // Runs layers [first, end) on h, the (post-activation) input of layer `first`.
  Mat<Scalar> forward_from(std::size_t first, Mat<Scalar> h) const {
    for (std::size_t l = first; l < layers_.size(); ++l) {
      h = layers_[l].forward(h, nullptr);
      if (l + 1 < layers_.size()) h = nn::relu(h);
    }
    return h;
  }

  void backward(const Mat<Scalar>& dq, const Cache& cache) {
    Mat<Scalar> d = dq;
    for (std::size_t l = layers_.size(); l-- > 0;) {
      d = layers_[l].backward(d, cache.layers[l]);
      if (l > 0) d = nn::relu_backward(cache.pre[l - 1], d);
    }
  }

  ParamRefs<Scalar> parameters() {
    ParamRefs<Scalar> out;
    for (auto& l : layers_) l.collect(out);
    return out;
  }

  int input_dim() const { return layers_.front().in_dim(); }
  int n_actions() const { return layers_.back().out_dim(); }
  nn::Dense<Scalar>& output_layer() { return layers_.back(); }

  template <typename To>
  QNetwork<To> cast() const {
    std::vector<int> hidden;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) hidden.push_back(layers_[l].out_dim());
    QNetwork<To> out(input_dim(), hidden, n_actions(), 0);
    auto self = *this;
    nn::copy_values(out.parameters(), self.parameters());
    return out;
  }

 private:
  std::vector<nn::Dense<Scalar>> layers_;
};

struct QNetworkPair {
  QNetwork<float> online;
  QNetwork<float> target;
  int n_slots = 4;
  int feature_dim = 16;
  AgentConfig config;

  QNetworkPair() = default;
  QNetworkPair(int n_slots, int feature_dim, const AgentConfig& config, std::uint64_t seed);
  void sync_target() { target = online; }
};

int state_input_dim(int n_slots, int feature_dim, bool append_mask);

/// Flattens states row-major (N*D reals, then N mask bits if requested).
template <typename Scalar>
Mat<Scalar> encode_states(std::span<const AcquisitionState* const> states, bool append_mask) {
  const int n = states.front()->n_slots();
  const int d = static_cast<int>(states.front()->features.cols());
  Mat<Scalar> x(static_cast<Eigen::Index>(states.size()), state_input_dim(n, d, append_mask));
  for (std::size_t r = 0; r < states.size(); ++r) {
    const auto& s = *states[r];
    x.row(static_cast<Eigen::Index>(r)).head(n * d) =
        Eigen::Map<const Eigen::RowVectorXf>(s.features.data(), n * d).template cast<Scalar>();
    if (append_mask)
      for (int i = 0; i < n; ++i) x(static_cast<Eigen::Index>(r), n * d + i) = s.mask[i] ? Scalar(1) : Scalar(0);
  }
  return x;
}

Eigen::VectorXd q_values(const QNetwork<float>& net, const AcquisitionState& state, bool append_mask);

/// Epsilon-greedy over valid actions; greedy ties go to the lowest index.
Action select_action(const Eigen::VectorXd& qvals, const std::vector<bool>& valid, double epsilon,
                     std::mt19937_64& rng);

/// Index of the largest value among valid entries (ties: lowest index).
int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& values, const std::vector<bool>& valid);

double epsilon_at(const AgentConfig& config, long episode, long total_episodes);

/// FIFO ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(env::TransitionRecord t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i-th oldest transition currently held.
  const env::TransitionRecord& at(std::size_t i) const;
  std::vector<const env::TransitionRecord*> sample(std::size_t n, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<env::TransitionRecord> items_;
};

/// Double-DQN targets: r for done transitions, otherwise
/// r + gamma * Q_target(s')[argmax over valid a of Q_online(s')].
std::vector<double> ddqn_target(std::span<const env::TransitionRecord* const> batch, const QNetwork<float>& online,
                                const QNetwork<float>& target, double gamma, bool allow_reselect, bool append_mask);

struct AgentEpochLog {
  int epoch = 0;
  double mean_reward = 0.0;          // training episodes
  double epsilon = 0.0;              // at the end of the epoch
  double val_bacc = 0.0;             // greedy rollouts
  double val_mean_reward = 0.0;
  double mean_acquired_count = 0.0;  // validation
  long gradient_steps = 0;
};

struct TrainedAgent {
  QNetworkPair networks;  // best epoch
  std::vector<AgentEpochLog> log;
  int best_epoch = 0;
  double best_val_bacc = -1.0;
};

TrainedAgent train_agent(const std::vector<StudyRecord>& train, const std::vector<StudyRecord>& val,
                         const classifier::Classifier& classifier, const env::RewardSpec& reward,
                         const AgentConfig& config, std::uint64_t seed,
                         const std::function<void(const AgentEpochLog&)>& on_epoch = {});

/// Epsilon = 0 episode.
env::EpisodeRecord rollout_greedy(const QNetwork<float>& policy, const AgentConfig& config, const env::LabelFn& predict,
                                  const StudyRecord& study, const env::RewardSpec& reward);

std::vector<env::EpisodeRecord> rollout_all(const QNetwork<float>& policy, const AgentConfig& config,
                                            const classifier::Classifier& classifier,
                                            const std::vector<StudyRecord>& studies, const env::RewardSpec& reward);

/// Balanced accuracy of greedy-rollout predictions.
double episodes_bacc(const std::vector<env::EpisodeRecord>& episodes);

void save_agent(const std::filesystem::path& stem, const QNetworkPair& pair, const nlohmann::json& extra_meta = {});
QNetworkPair load_agent(const std::filesystem::path& stem);
nlohmann::json read_agent_meta(const std::filesystem::path& stem);

/// Finite-difference check of the MSE between Q(s)[a] and fixed targets.
nn::GradCheckReport grad_check_qnetwork(QNetwork<double>& net, const Mat<double>& inputs, const std::vector<int>& actions,
                                        const std::vector<double>& targets, nn::GradCheckOptions options = {});

}  // namespace afa::agent
