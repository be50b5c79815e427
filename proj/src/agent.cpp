#include "afa/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "afa/json_util.hpp"
#include "afa/metrics.hpp"
#include "afa/neural/adam.hpp"
#include "afa/neural/checkpoint.hpp"
#include "afa/neural/losses.hpp"

namespace afa::agent {

namespace {

constexpr const char* kKind = "agent";

Mat<float> mse_gradient(const Mat<float>& q, std::span<const env::TransitionRecord* const> batch,
                        const std::vector<double>& targets, float& loss) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  nn::Vec<float> pred(b), y(b), dpred;
  for (Eigen::Index r = 0; r < b; ++r) {
    pred[r] = q(r, batch[static_cast<std::size_t>(r)]->action.index());
    y[r] = static_cast<float>(targets[static_cast<std::size_t>(r)]);
  }
  loss = nn::mse(pred, y, dpred);
  Mat<float> dq = Mat<float>::Zero(q.rows(), q.cols());
  for (Eigen::Index r = 0; r < b; ++r) dq(r, batch[static_cast<std::size_t>(r)]->action.index()) = dpred[r];
  return dq;
}

}  // namespace

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw Error("config", "agent gamma must lie in [0,1]");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0))
    throw Error("config", "agent epsilon must lie in [0,1]");
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0))
    throw Error("config", "agent epsilon_decay_fraction must lie in (0,1]");
  if (epochs < 0 || replay_capacity <= 0 || batch_size <= 0 || target_sync <= 0)
    throw Error("config", "agent epochs/replay_capacity/batch_size/target_sync invalid");
  if (!(learning_rate > 0.0)) throw Error("config", "agent learning_rate must be positive");
  if (!(weight_decay >= 0.0) || learning_rate * weight_decay >= 1.0)
    throw Error("config", "agent weight_decay must be >= 0 with learning_rate * weight_decay < 1");
  for (int h : hidden)
    if (h <= 0) throw Error("config", "agent hidden widths must be positive");
}

nlohmann::json to_json(const AgentConfig& c) {
  return {{"gamma", c.gamma},
          {"epochs", c.epochs},
          {"epsilon_start", c.epsilon_start},
          {"epsilon_end", c.epsilon_end},
          {"epsilon_decay_fraction", c.epsilon_decay_fraction},
          {"replay_capacity", c.replay_capacity},
          {"batch_size", c.batch_size},
          {"target_sync", c.target_sync},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"hidden", c.hidden},
          {"allow_reselect", c.allow_reselect},
          {"append_mask", c.append_mask}};
}

AgentConfig config_from_json(const nlohmann::json& j) {
  const std::string ctx = "agent";
  json_util::reject_unknown(j,
                            {"gamma", "epochs", "epsilon_start", "epsilon_end", "epsilon_decay_fraction",
                             "replay_capacity", "batch_size", "target_sync", "learning_rate", "weight_decay",
                             "hidden", "allow_reselect", "append_mask"},
                            ctx);
  AgentConfig c;
  json_util::read(j, "gamma", c.gamma, ctx);
  json_util::read(j, "epochs", c.epochs, ctx);
  json_util::read(j, "epsilon_start", c.epsilon_start, ctx);
  json_util::read(j, "epsilon_end", c.epsilon_end, ctx);
  json_util::read(j, "epsilon_decay_fraction", c.epsilon_decay_fraction, ctx);
  json_util::read(j, "replay_capacity", c.replay_capacity, ctx);
  json_util::read(j, "batch_size", c.batch_size, ctx);
  json_util::read(j, "target_sync", c.target_sync, ctx);
  json_util::read(j, "learning_rate", c.learning_rate, ctx);
  json_util::read(j, "weight_decay", c.weight_decay, ctx);
  json_util::read(j, "hidden", c.hidden, ctx);
  json_util::read(j, "allow_reselect", c.allow_reselect, ctx);
  json_util::read(j, "append_mask", c.append_mask, ctx);
  c.validate();
  return c;
}

int state_input_dim(int n_slots, int feature_dim, bool append_mask) {
  return n_slots * feature_dim + (append_mask ? n_slots : 0);
}

QNetworkPair::QNetworkPair(int n, int d, const AgentConfig& cfg, std::uint64_t seed)
    : online(state_input_dim(n, d, cfg.append_mask), cfg.hidden, n + 1, seed), n_slots(n), feature_dim(d), config(cfg) {
  target = online;
}

Eigen::VectorXd q_values(const QNetwork<float>& net, const AcquisitionState& state, bool append_mask) {
  const AcquisitionState* ptr = &state;
  const auto x = encode_states<float>(std::span(&ptr, 1), append_mask);
  if (x.cols() != net.input_dim())
    throw Error("shape", "state encodes to " + std::to_string(x.cols()) + " inputs, Q-network expects " +
                             std::to_string(net.input_dim()));
  return net.forward(x).row(0).transpose().cast<double>();
}

int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& values, const std::vector<bool>& valid) {
  int best = -1;
  for (Eigen::Index a = 0; a < values.size(); ++a) {
    if (!valid[static_cast<std::size_t>(a)]) continue;
    if (best < 0 || values[a] > values[best]) best = static_cast<int>(a);
  }
  if (best < 0) throw Error("action", "no valid action");
  return best;
}

Action select_action(const Eigen::VectorXd& qvals, const std::vector<bool>& valid, double epsilon,
                     std::mt19937_64& rng) {
  if (static_cast<std::size_t>(qvals.size()) != valid.size()) throw Error("shape", "q-values and action mask differ in length");
  std::vector<int> candidates;
  for (std::size_t a = 0; a < valid.size(); ++a)
    if (valid[a]) candidates.push_back(static_cast<int>(a));
  if (candidates.empty()) throw Error("action", "no valid action");
  const int n_slots = static_cast<int>(valid.size()) - 1;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return Action::from_index(candidates[pick(rng)], n_slots);
  }
  return Action::from_index(masked_argmax(qvals, valid), n_slots);
}

double epsilon_at(const AgentConfig& c, long episode, long total_episodes) {
  const double horizon = c.epsilon_decay_fraction * static_cast<double>(std::max(total_episodes, 1L));
  const double frac = std::min(1.0, static_cast<double>(episode) / horizon);
  return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * frac;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("config", "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(env::TransitionRecord t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const env::TransitionRecord& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw Error("replay", "index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const env::TransitionRecord*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  if (items_.empty()) throw Error("replay", "cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<const env::TransitionRecord*> out(n);
  for (auto& p : out) p = &items_[pick(rng)];
  return out;
}

std::vector<double> ddqn_target(std::span<const env::TransitionRecord* const> batch, const QNetwork<float>& online,
                                const QNetwork<float>& target, double gamma, bool allow_reselect, bool append_mask) {
  if (batch.empty()) throw Error("replay", "empty batch");
  std::vector<double> y(batch.size());
  std::vector<const AcquisitionState*> next;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i]->reward;
    if (!batch[i]->done) {
      next.push_back(&batch[i]->next_state);
      rows.push_back(i);
    }
  }
  if (next.empty()) return y;
  const auto x = encode_states<float>(next, append_mask);
  const Eigen::MatrixXd q_online = online.forward(x).cast<double>();
  const Eigen::MatrixXd q_target = target.forward(x).cast<double>();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto valid = env::action_mask(*next[k], allow_reselect);
    const int a = masked_argmax(q_online.row(static_cast<Eigen::Index>(k)).transpose(), valid);
    y[rows[k]] += gamma * q_target(static_cast<Eigen::Index>(k), a);
  }
  return y;
}

env::EpisodeRecord rollout_greedy(const QNetwork<float>& policy, const AgentConfig& config, const env::LabelFn& predict,
                                  const StudyRecord& study, const env::RewardSpec& reward) {
  env::EpisodeRecord rec;
  rec.study_id = study.study_id;
  rec.label = study.label;
  auto state = env::reset(study);
  while (true) {
    const auto qv = q_values(policy, state, config.append_mask);
    const auto valid = env::action_mask(state, config.allow_reselect);
    const Action a = Action::from_index(masked_argmax(qv, valid), study.n_slots());
    rec.actions.push_back(a.index());
    auto res = env::step(study, state, a, reward, predict, config.allow_reselect);
    if (res.done) {
      rec.reward = res.reward;
      rec.timeout = res.timeout;
      rec.terminal_mask = res.next.mask;
      // On timeout no reward-bearing prediction is made; record what the
      // classifier would have said for the metrics.
      rec.predicted = predict(a.is_terminate() ? state : res.next);
      break;
    }
    state = std::move(res.next);
  }
  return rec;
}

std::vector<env::EpisodeRecord> rollout_all(const QNetwork<float>& policy, const AgentConfig& config,
                                            const classifier::Classifier& classifier,
                                            const std::vector<StudyRecord>& studies, const env::RewardSpec& reward) {
  classifier::PredictionCache cache(classifier, studies);
  std::vector<env::EpisodeRecord> out;
  out.reserve(studies.size());
  for (std::size_t i = 0; i < studies.size(); ++i)
    out.push_back(rollout_greedy(policy, config, cache.bind(i), studies[i], reward));
  return out;
}

double episodes_bacc(const std::vector<env::EpisodeRecord>& episodes) {
  std::vector<int> preds, labels;
  for (const auto& e : episodes) {
    preds.push_back(e.predicted);
    labels.push_back(e.label);
  }
  return metrics::balanced_accuracy(preds, labels);
}

TrainedAgent train_agent(const std::vector<StudyRecord>& train, const std::vector<StudyRecord>& val,
                         const classifier::Classifier& classifier, const env::RewardSpec& reward,
                         const AgentConfig& config, std::uint64_t seed,
                         const std::function<void(const AgentEpochLog&)>& on_epoch) {
  if (train.empty() || val.empty()) throw Error("train", "agent training needs nonempty train and val splits");
  config.validate();
  reward.validate();
  const int n = train.front().n_slots(), d = train.front().feature_dim();
  if (classifier.shape() != classifier::InputShape{n, d}) throw Error("shape", "classifier does not match the dataset shape");

  QNetworkPair nets(n, d, config, seed);
  auto params = nets.online.parameters();
  nn::OptimizerState<float> opt(params, nn::AdamConfig{.learning_rate = config.learning_rate, .weight_decay = config.weight_decay});
  ReplayBuffer buffer(static_cast<std::size_t>(config.replay_capacity));
  std::mt19937_64 rng(seed ^ 0x64647164ULL);
  classifier::PredictionCache train_preds(classifier, train);

  TrainedAgent result;
  result.networks = nets;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const long total_episodes = static_cast<long>(config.epochs) * static_cast<long>(train.size());
  long episode = 0, grad_steps = 0;
  QNetwork<float>::Cache cache;
  std::vector<const AcquisitionState*> batch_states(static_cast<std::size_t>(config.batch_size));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double reward_sum = 0.0;
    double eps = config.epsilon_start;
    for (std::size_t idx : order) {
      const auto& study = train[idx];
      const auto predict = train_preds.bind(idx);
      eps = epsilon_at(config, episode, total_episodes);
      auto state = env::reset(study);
      bool done = false;
      while (!done) {
        const auto qv = q_values(nets.online, state, config.append_mask);
        const Action a = select_action(qv, env::action_mask(state, config.allow_reselect), eps, rng);
        auto res = env::step(study, state, a, reward, predict, config.allow_reselect);
        done = res.done;
        if (done) reward_sum += res.reward;
        buffer.push({state, a, res.reward, res.next, res.done});
        state = std::move(res.next);

        if (buffer.size() >= static_cast<std::size_t>(config.batch_size)) {
          const auto batch = buffer.sample(static_cast<std::size_t>(config.batch_size), rng);
          const auto targets =
              ddqn_target(batch, nets.online, nets.target, config.gamma, config.allow_reselect, config.append_mask);
          for (std::size_t k = 0; k < batch.size(); ++k) batch_states[k] = &batch[k]->state;
          const auto x = encode_states<float>(batch_states, config.append_mask);
          nn::zero_grads(params);
          const Mat<float> q = nets.online.forward(x, &cache);
          float loss = 0.0f;
          const Mat<float> dq = mse_gradient(q, batch, targets, loss);
          if (!std::isfinite(loss))
            throw Error("diverged", "agent training diverged (non-finite TD loss) in epoch " + std::to_string(epoch) +
                                        ", gradient step " + std::to_string(grad_steps));
          nets.online.backward(dq, cache);
          nn::adam_step(params, opt);
          if (++grad_steps % config.target_sync == 0) nets.sync_target();
        }
      }
      ++episode;
    }

    AgentEpochLog entry;
    entry.epoch = epoch;
    entry.mean_reward = reward_sum / static_cast<double>(train.size());
    entry.epsilon = eps;
    entry.gradient_steps = grad_steps;
    const auto episodes = rollout_all(nets.online, config, classifier, val, reward);
    entry.val_bacc = episodes_bacc(episodes);
    double val_reward = 0.0, acquired = 0.0;
    for (const auto& e : episodes) {
      val_reward += e.reward;
      acquired += e.acquired_count();
    }
    entry.val_mean_reward = val_reward / static_cast<double>(episodes.size());
    entry.mean_acquired_count = acquired / static_cast<double>(episodes.size());
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (entry.val_bacc > result.best_val_bacc) {
      result.best_val_bacc = entry.val_bacc;
      result.best_epoch = epoch;
      result.networks = nets;
    }
  }
  return result;
}

void save_agent(const std::filesystem::path& stem, const QNetworkPair& pair, const nlohmann::json& extra_meta) {
  nn::Checkpoint ckpt;
  ckpt.meta = {{"kind", kKind},
               {"config", to_json(pair.config)},
               {"n_slots", pair.n_slots},
               {"feature_dim", pair.feature_dim}};
  if (extra_meta.is_object())
    for (const auto& [k, v] : extra_meta.items()) ckpt.meta[k] = v;
  auto copy = pair;
  nn::append_params(ckpt, copy.online.parameters(), "online.");
  nn::append_params(ckpt, copy.target.parameters(), "target.");
  nn::write_checkpoint(stem, ckpt);
}

nlohmann::json read_agent_meta(const std::filesystem::path& stem) { return nn::read_checkpoint(stem).meta; }

QNetworkPair load_agent(const std::filesystem::path& stem) {
  const auto ckpt = nn::read_checkpoint(stem);
  if (ckpt.meta.value("kind", "") != kKind) throw Error("checkpoint", stem.string() + " is not an agent checkpoint");
  QNetworkPair pair(ckpt.meta.at("n_slots").get<int>(), ckpt.meta.at("feature_dim").get<int>(),
                    config_from_json(ckpt.meta.at("config")), 0);
  nn::assign_params(ckpt, pair.online.parameters(), "online.");
  nn::assign_params(ckpt, pair.target.parameters(), "target.");
  return pair;
}

nn::GradCheckReport grad_check_qnetwork(QNetwork<double>& net, const Mat<double>& inputs, const std::vector<int>& actions,
                                        const std::vector<double>& targets, nn::GradCheckOptions options) {
  auto params = net.parameters();
  const auto b = inputs.rows();
  nn::Vec<double> y = Eigen::Map<const nn::Vec<double>>(targets.data(), b);
  auto loss_of = [&](const Mat<double>& q, nn::Vec<double>& dpred) {
    nn::Vec<double> pred(b);
    for (Eigen::Index r = 0; r < b; ++r) pred[r] = q(r, actions[static_cast<std::size_t>(r)]);
    return nn::mse(pred, y, dpred);
  };
  auto backward = [&] {
    QNetwork<double>::Cache cache;
    const auto q = net.forward(inputs, &cache);
    nn::Vec<double> dpred;
    loss_of(q, dpred);
    Mat<double> dq = Mat<double>::Zero(q.rows(), q.cols());
    for (Eigen::Index r = 0; r < b; ++r) dq(r, actions[static_cast<std::size_t>(r)]) = dpred[r];
    net.backward(dq, cache);
  };
  // Input of each layer at the unperturbed weights; perturbing tensor t only
  // changes layers from t / 2 onward (each layer holds W and b).
  std::vector<Mat<double>> layer_inputs{inputs};
  {
    QNetwork<double>::Cache cache;
    net.forward(inputs, &cache);
    for (const auto& pre : cache.pre) layer_inputs.push_back(nn::relu(pre));
  }
  auto loss = [&](std::size_t t) {
    nn::Vec<double> unused;
    return loss_of(net.forward_from(t / 2, layer_inputs[t / 2]), unused);
  };
  return nn::grad_check(params, backward, loss, options);
}

}  // namespace afa::agent
