#include "afa/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "afa/json_util.hpp"
#include "afa/metrics.hpp"
#include "afa/neural/adam.hpp"
#include "afa/neural/checkpoint.hpp"

namespace afa::classifier {

namespace {

constexpr std::size_t kInferenceBatch = 256;
constexpr const char* kKind = "classifier";

std::vector<AcquisitionState> full_states(const std::vector<StudyRecord>& studies) {
  std::vector<AcquisitionState> states;
  states.reserve(studies.size());
  for (const auto& s : studies) states.push_back(apply_mask(s, Mask(s.n_slots(), true)));
  return states;
}

}  // namespace

void ClassifierConfig::validate() const {
  if (n_layers < 0 || n_heads <= 0 || ff_dim <= 0 || model_dim <= 0 || n_classes < 2)
    throw Error("config", "classifier dimensions must be positive");
  if (model_dim % n_heads != 0) throw Error("config", "classifier model_dim must be divisible by n_heads");
  if (!(mask_rate_train >= 0.0 && mask_rate_train <= 1.0)) throw Error("config", "mask_rate_train must lie in [0,1]");
  if (epochs < 0 || batch_size <= 0) throw Error("config", "classifier epochs/batch_size invalid");
  if (!(learning_rate > 0.0)) throw Error("config", "classifier learning_rate must be positive");
}

nlohmann::json to_json(const ClassifierConfig& c) {
  return {{"n_layers", c.n_layers},     {"n_heads", c.n_heads},
          {"ff_dim", c.ff_dim},         {"model_dim", c.model_dim},
          {"n_classes", c.n_classes},   {"mask_rate_train", c.mask_rate_train},
          {"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}};
}

ClassifierConfig config_from_json(const nlohmann::json& j) {
  const std::string ctx = "classifier";
  json_util::reject_unknown(j,
                            {"n_layers", "n_heads", "ff_dim", "model_dim", "n_classes", "mask_rate_train", "epochs",
                             "batch_size", "learning_rate"},
                            ctx);
  ClassifierConfig c;
  json_util::read(j, "n_layers", c.n_layers, ctx);
  json_util::read(j, "n_heads", c.n_heads, ctx);
  json_util::read(j, "ff_dim", c.ff_dim, ctx);
  json_util::read(j, "model_dim", c.model_dim, ctx);
  json_util::read(j, "n_classes", c.n_classes, ctx);
  json_util::read(j, "mask_rate_train", c.mask_rate_train, ctx);
  json_util::read(j, "epochs", c.epochs, ctx);
  json_util::read(j, "batch_size", c.batch_size, ctx);
  json_util::read(j, "learning_rate", c.learning_rate, ctx);
  c.validate();
  return c;
}

Eigen::VectorXd classify(const Classifier& model, const AcquisitionState& state) {
  const auto batch = make_batch<float>(std::span(&state, 1), model.shape());
  const Eigen::VectorXd logits = model.logits(batch).row(0).transpose().cast<double>();
  return nn::softmax<double>(logits);
}

int predict_label(const Eigen::VectorXd& probs) {
  int best = 0;
  for (Eigen::Index c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = static_cast<int>(c);
  return best;
}

int predict_label(const Classifier& model, const AcquisitionState& state) { return predict_label(classify(model, state)); }

std::vector<int> predict_labels(const Classifier& model, std::span<const AcquisitionState> states) {
  std::vector<int> out;
  out.reserve(states.size());
  for (std::size_t start = 0; start < states.size(); start += kInferenceBatch) {
    const auto chunk = states.subspan(start, std::min(kInferenceBatch, states.size() - start));
    const auto logits = model.logits(make_batch<float>(chunk, model.shape()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      // Same rule as predict_label(probs): softmax is monotone.
      int best = 0;
      for (Eigen::Index c = 1; c < logits.cols(); ++c)
        if (logits(r, c) > logits(r, best)) best = static_cast<int>(c);
      out.push_back(best);
    }
  }
  return out;
}

PredictionCache::PredictionCache(const Classifier& model, const std::vector<StudyRecord>& studies)
    : model_(&model), n_masks_(std::size_t{1} << model.shape().n_slots) {
  if (model.shape().n_slots > 16) throw Error("shape", "prediction cache supports at most 16 slots");
  labels_.assign(studies.size() * n_masks_, -1);
}

int PredictionCache::predict(std::size_t study_index, const AcquisitionState& state) {
  auto& slot = labels_.at(study_index * n_masks_ + state.mask_bits());
  if (slot < 0) slot = static_cast<std::int8_t>(predict_label(*model_, state));
  return slot;
}

std::function<int(const AcquisitionState&)> PredictionCache::bind(std::size_t study_index) {
  return [this, study_index](const AcquisitionState& s) { return predict(study_index, s); };
}

Mask sample_training_mask(int n_slots, double mask_rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - mask_rate);
  Mask mask(n_slots);
  for (int i = 0; i < n_slots; ++i) mask[i] = keep(rng);
  return mask;
}

double full_acquisition_bacc(const Classifier& model, const std::vector<StudyRecord>& studies) {
  const auto states = full_states(studies);
  const auto preds = predict_labels(model, states);
  std::vector<int> labels;
  for (const auto& s : studies) labels.push_back(s.label);
  return metrics::balanced_accuracy(preds, labels);
}

TrainedClassifier train_classifier(const std::vector<StudyRecord>& train, const std::vector<StudyRecord>& val,
                                   const ClassifierConfig& config, std::uint64_t seed,
                                   const std::function<void(const EpochLog&)>& on_epoch) {
  if (train.empty() || val.empty()) throw Error("train", "classifier training needs nonempty train and val splits");
  config.validate();
  const InputShape shape{train.front().n_slots(), train.front().feature_dim()};

  TrainedClassifier result;
  Classifier model(shape, config, seed);
  auto params = model.parameters();
  nn::OptimizerState<float> opt(params, nn::AdamConfig{config.learning_rate});
  std::mt19937_64 rng(seed ^ 0x6d61736b73ULL);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Classifier::Cache cache;
  Mat<float> dlogits;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    long masked = 0, total_slots = 0;
    int n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<AcquisitionState> states;
      std::vector<int> labels;
      for (std::size_t k = start; k < end; ++k) {
        const auto& study = train[order[k]];
        const Mask mask = sample_training_mask(study.n_slots(), config.mask_rate_train, rng);
        for (bool m : mask) masked += m ? 0 : 1;
        total_slots += study.n_slots();
        states.push_back(apply_mask(study, mask));
        labels.push_back(study.label);
      }
      const auto batch = make_batch<float>(states, shape);
      nn::zero_grads(params);
      const Mat<float> logits = model.logits(batch, &cache);
      const float loss = nn::softmax_cross_entropy(logits, labels, dlogits);
      if (!std::isfinite(loss))
        throw Error("diverged", "classifier training diverged (non-finite loss) in epoch " + std::to_string(epoch));
      model.backward(dlogits, cache);
      nn::adam_step(params, opt);
      loss_sum += loss;
      ++n_batches;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = n_batches ? loss_sum / n_batches : 0.0;
    entry.masked_fraction = total_slots ? static_cast<double>(masked) / static_cast<double>(total_slots) : 0.0;
    entry.val_bacc = full_acquisition_bacc(model, val);
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (entry.val_bacc > result.best_val_bacc) {
      result.best_val_bacc = entry.val_bacc;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  if (config.epochs == 0) result.model = model;
  return result;
}

void save_classifier(const std::filesystem::path& stem, const Classifier& model, const nlohmann::json& extra_meta) {
  nn::Checkpoint ckpt;
  ckpt.meta = {{"kind", kKind},
               {"config", to_json(model.config())},
               {"n_slots", model.shape().n_slots},
               {"feature_dim", model.shape().feature_dim}};
  if (extra_meta.is_object())
    for (const auto& [k, v] : extra_meta.items()) ckpt.meta[k] = v;
  auto copy = model;
  nn::append_params(ckpt, copy.parameters());
  nn::write_checkpoint(stem, ckpt);
}

Classifier load_classifier(const std::filesystem::path& stem) {
  const auto ckpt = nn::read_checkpoint(stem);
  if (ckpt.meta.value("kind", "") != kKind) throw Error("checkpoint", stem.string() + " is not a classifier checkpoint");
  const InputShape shape{ckpt.meta.at("n_slots").get<int>(), ckpt.meta.at("feature_dim").get<int>()};
  Classifier model(shape, config_from_json(ckpt.meta.at("config")), 0);
  nn::assign_params(ckpt, model.parameters());
  return model;
}

nn::GradCheckReport grad_check_classifier(ClassifierModel<double>& model, std::span<const AcquisitionState> states,
                                          const std::vector<int>& labels, nn::GradCheckOptions options) {
  const auto batch = make_batch<double>(states, model.shape());
  auto params = model.parameters();
  const auto stages = model.parameter_stages();
  std::vector<Mat<double>> stage_inputs;
  Mat<double> dlogits;

  auto backward = [&] {
    ClassifierModel<double>::Cache cache;
    const auto logits = model.logits(batch, &cache);
    nn::softmax_cross_entropy(logits, labels, dlogits);
    model.backward(dlogits, cache);
    stage_inputs = model.record_stage_inputs(batch);
  };
  auto loss = [&](std::size_t param_index) {
    const auto logits = model.logits_from_stage(batch, stages[param_index], stage_inputs);
    Mat<double> unused;
    return nn::softmax_cross_entropy(logits, labels, unused);
  };
  return nn::grad_check(params, backward, loss, options);
}

}  // namespace afa::classifier
