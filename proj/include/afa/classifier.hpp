#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "afa/core.hpp"
#include "afa/neural/attention.hpp"
#include "afa/neural/grad_check.hpp"
#include "afa/neural/losses.hpp"
#include "json.hpp"

namespace afa::classifier {

using nn::Mat;
using nn::ParamRefs;

struct ClassifierConfig {
  int n_layers = 6;
  int n_heads = 8;
  int ff_dim = 256;
  int model_dim = 64;
  int n_classes = kNumClasses;
  double mask_rate_train = 0.5;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;

  void validate() const;
};

nlohmann::json to_json(const ClassifierConfig& c);
ClassifierConfig config_from_json(const nlohmann::json& j);

struct InputShape {
  int n_slots = 4;
  int feature_dim = 16;
  bool operator==(const InputShape&) const = default;
};

/// B studies stacked as (B*N) x D feature rows with one mask flag per row.
/// Unacquired rows must already be zero.
template <typename Scalar>
struct TokenBatch {
  Mat<Scalar> features;
  Mask mask;
  int size = 0;
};

template <typename Scalar>
TokenBatch<Scalar> make_batch(std::span<const AcquisitionState> states, InputShape shape) {
  TokenBatch<Scalar> batch;
  batch.size = static_cast<int>(states.size());
  batch.features.resize(static_cast<Eigen::Index>(states.size()) * shape.n_slots, shape.feature_dim);
  batch.mask.reserve(states.size() * static_cast<std::size_t>(shape.n_slots));
  for (std::size_t b = 0; b < states.size(); ++b) {
    const auto& s = states[b];
    if (s.n_slots() != shape.n_slots || s.features.cols() != shape.feature_dim)
      throw Error("shape", "state is " + std::to_string(s.n_slots()) + "x" + std::to_string(s.features.cols()) +
                               ", classifier expects " + std::to_string(shape.n_slots) + "x" +
                               std::to_string(shape.feature_dim));
    batch.features.middleRows(static_cast<Eigen::Index>(b) * shape.n_slots, shape.n_slots) = s.features.template cast<Scalar>();
    batch.mask.insert(batch.mask.end(), s.mask.begin(), s.mask.end());
  }
  return batch;
}

/// Study-level attention classifier. Each slot is a token (projected D ->
/// model_dim, plus a learned positional embedding by canonical slot order);
/// a learned CLS token is prepended and the encoder's key mask admits only
/// the CLS token and acquired slots. Logits come from the final CLS state.
template <typename Scalar>
class ClassifierModel {
 public:
  struct Cache {
    typename nn::Dense<Scalar>::Cache input;
    std::vector<typename nn::EncoderBlock<Scalar>::Cache> blocks;
    typename nn::LayerNorm<Scalar>::Cache final_ln;
    typename nn::Dense<Scalar>::Cache head;
    Mask key_mask;
    int batch = 0;
  };

  ClassifierModel() = default;

  ClassifierModel(InputShape shape, const ClassifierConfig& config, std::uint64_t seed)
      : shape_(shape), config_(config) {
    config.validate();
    if (shape.n_slots <= 0 || shape.feature_dim <= 0) throw Error("shape", "classifier input shape must be positive");
    const int dm = config.model_dim;
    input_ = nn::Dense<Scalar>("input", shape.feature_dim, dm);
    cls_ = nn::Param<Scalar>("cls", 1, dm);
    pos_ = nn::Param<Scalar>("pos", shape.n_slots + 1, dm);
    for (int l = 0; l < config.n_layers; ++l)
      blocks_.emplace_back("block" + std::to_string(l), dm, config.n_heads, config.ff_dim);
    final_ln_ = nn::LayerNorm<Scalar>("final_ln", dm);
    head_ = nn::Dense<Scalar>("head", dm, config.n_classes);

    nn::Initializer init(seed);
    input_.init(init);
    init.normal(cls_, 0.02);
    init.normal(pos_, 0.02);
    for (auto& b : blocks_) b.init(init);
    head_.init(init);
  }

  int seq_len() const { return shape_.n_slots + 1; }
  const InputShape& shape() const { return shape_; }
  const ClassifierConfig& config() const { return config_; }

  /// Logits, one row per study in the batch.
  Mat<Scalar> logits(const TokenBatch<Scalar>& batch, Cache* cache = nullptr) const {
    Mat<Scalar> h = embed(batch, cache);
    const auto key_mask = make_key_mask(batch);
    if (cache) cache->blocks.resize(blocks_.size());
    for (std::size_t l = 0; l < blocks_.size(); ++l)
      h = blocks_[l].forward(h, key_mask, seq_len(), cache ? &cache->blocks[l] : nullptr);
    if (cache) cache->key_mask = key_mask;
    return readout(h, batch.size, cache);
  }

  void backward(const Mat<Scalar>& dlogits, const Cache& cache) {
    const int t = seq_len(), n = shape_.n_slots;
    const Mat<Scalar> dcls_state = final_ln_.backward(head_.backward(dlogits, cache.head), cache.final_ln);
    Mat<Scalar> dh = Mat<Scalar>::Zero(static_cast<Eigen::Index>(cache.batch) * t, config_.model_dim);
    for (int b = 0; b < cache.batch; ++b) dh.row(b * t) = dcls_state.row(b);
    for (std::size_t l = blocks_.size(); l-- > 0;) dh = blocks_[l].backward(dh, cache.blocks[l]);
    Mat<Scalar> dx(static_cast<Eigen::Index>(cache.batch) * n, config_.model_dim);
    for (int b = 0; b < cache.batch; ++b) {
      cls_.grad.row(0) += dh.row(b * t);
      pos_.grad += dh.middleRows(b * t, t);
      dx.middleRows(b * n, n) = dh.middleRows(b * t + 1, n);
    }
    input_.backward(dx, cache.input);
  }

  ParamRefs<Scalar> parameters() {
    ParamRefs<Scalar> out;
    input_.collect(out);
    out.push_back(&cls_);
    out.push_back(&pos_);
    for (auto& b : blocks_) b.collect(out);
    final_ln_.collect(out);
    head_.collect(out);
    return out;
  }

  /// Pipeline stage that owns each parameter tensor (0 = embedding,
  /// 1..L = encoder blocks, L+1 = readout), in parameters() order.
  std::vector<int> parameter_stages() {
    std::vector<int> stages;
    ParamRefs<Scalar> tmp;
    input_.collect(tmp);
    stages.insert(stages.end(), tmp.size() + 2, 0);
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
      tmp.clear();
      blocks_[l].collect(tmp);
      stages.insert(stages.end(), tmp.size(), static_cast<int>(l) + 1);
    }
    tmp.clear();
    final_ln_.collect(tmp);
    head_.collect(tmp);
    stages.insert(stages.end(), tmp.size(), static_cast<int>(blocks_.size()) + 1);
    return stages;
  }

  /// Inputs to every pipeline stage: index s >= 1 is the input of stage s
  /// (index 0 unused).
  std::vector<Mat<Scalar>> record_stage_inputs(const TokenBatch<Scalar>& batch) const {
    const auto key_mask = make_key_mask(batch);
    std::vector<Mat<Scalar>> inputs(blocks_.size() + 2);
    inputs[1] = embed(batch, nullptr);
    for (std::size_t l = 0; l < blocks_.size(); ++l) inputs[l + 2] = blocks_[l].forward(inputs[l + 1], key_mask, seq_len());
    return inputs;
  }

  /// Forward pass that starts at `stage`, taking its input from
  /// `stage_inputs` (valid while parameters upstream of `stage` are unchanged).
  Mat<Scalar> logits_from_stage(const TokenBatch<Scalar>& batch, int stage,
                                const std::vector<Mat<Scalar>>& stage_inputs) const {
    if (stage == 0) return logits(batch);
    const auto key_mask = make_key_mask(batch);
    Mat<Scalar> h = stage_inputs.at(static_cast<std::size_t>(stage));
    for (std::size_t l = static_cast<std::size_t>(stage) - 1; l < blocks_.size(); ++l)
      h = blocks_[l].forward(h, key_mask, seq_len());
    return readout(h, batch.size, nullptr);
  }

  template <typename To>
  ClassifierModel<To> cast() const {
    ClassifierModel<To> out(shape_, config_, 0);
    auto self = *this;
    nn::copy_values(out.parameters(), self.parameters());
    return out;
  }

 private:
  Mask make_key_mask(const TokenBatch<Scalar>& batch) const {
    const int t = seq_len(), n = shape_.n_slots;
    Mask key_mask(static_cast<std::size_t>(batch.size) * t);
    for (int b = 0; b < batch.size; ++b) {
      key_mask[static_cast<std::size_t>(b * t)] = true;
      for (int i = 0; i < n; ++i) key_mask[static_cast<std::size_t>(b * t + 1 + i)] = batch.mask[static_cast<std::size_t>(b * n + i)];
    }
    return key_mask;
  }

  Mat<Scalar> embed(const TokenBatch<Scalar>& batch, Cache* cache) const {
    const int t = seq_len(), n = shape_.n_slots;
    if (batch.features.cols() != shape_.feature_dim)
      throw Error("shape", "classifier expects D=" + std::to_string(shape_.feature_dim) + ", got " +
                               std::to_string(batch.features.cols()));
    if (batch.features.rows() != static_cast<Eigen::Index>(batch.size) * n ||
        batch.mask.size() != static_cast<std::size_t>(batch.size) * n)
      throw Error("shape", "token batch does not match N=" + std::to_string(n));
    const Mat<Scalar> x = input_.forward(batch.features, cache ? &cache->input : nullptr);
    Mat<Scalar> h(static_cast<Eigen::Index>(batch.size) * t, config_.model_dim);
    for (int b = 0; b < batch.size; ++b) {
      h.row(b * t) = cls_.value.row(0) + pos_.value.row(0);
      h.middleRows(b * t + 1, n) = x.middleRows(b * n, n) + pos_.value.bottomRows(n);
    }
    if (cache) cache->batch = batch.size;
    return h;
  }

  Mat<Scalar> readout(const Mat<Scalar>& h, int batch, Cache* cache) const {
    Mat<Scalar> cls_state(batch, config_.model_dim);
    for (int b = 0; b < batch; ++b) cls_state.row(b) = h.row(b * seq_len());
    return head_.forward(final_ln_.forward(cls_state, cache ? &cache->final_ln : nullptr), cache ? &cache->head : nullptr);
  }

  InputShape shape_;
  ClassifierConfig config_;
  nn::Dense<Scalar> input_;
  nn::Param<Scalar> cls_;
  nn::Param<Scalar> pos_;
  std::vector<nn::EncoderBlock<Scalar>> blocks_;
  nn::LayerNorm<Scalar> final_ln_;
  nn::Dense<Scalar> head_;
};

using Classifier = ClassifierModel<float>;

/// Class probabilities for one state.
Eigen::VectorXd classify(const Classifier& model, const AcquisitionState& state);

/// Argmax with ties to the lower label.
int predict_label(const Eigen::VectorXd& probs);
int predict_label(const Classifier& model, const AcquisitionState& state);

/// Batched prediction.
std::vector<int> predict_labels(const Classifier& model, std::span<const AcquisitionState> states);

/// Memoizes predictions per (study, acquired set); the classifier is frozen
/// so the label depends on nothing else. Not thread-safe.
class PredictionCache {
 public:
  PredictionCache(const Classifier& model, const std::vector<StudyRecord>& studies);
  int predict(std::size_t study_index, const AcquisitionState& state);
  std::function<int(const AcquisitionState&)> bind(std::size_t study_index);

 private:
  const Classifier* model_;
  std::size_t n_masks_;
  std::vector<std::int8_t> labels_;
};

/// Draws a training mask: each slot kept independently with probability
/// 1 - mask_rate.
Mask sample_training_mask(int n_slots, double mask_rate, std::mt19937_64& rng);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double masked_fraction = 0.0;
  double val_bacc = 0.0;
};

struct TrainedClassifier {
  Classifier model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_bacc = -1.0;
};

/// Trains with a fresh random slot mask per (study, epoch); masked slots are
/// zeroed and excluded from attention. Returns the epoch with the best
/// validation bACC under full acquisition (ties: earliest).
TrainedClassifier train_classifier(const std::vector<StudyRecord>& train, const std::vector<StudyRecord>& val,
                                   const ClassifierConfig& config, std::uint64_t seed,
                                   const std::function<void(const EpochLog&)>& on_epoch = {});

/// Balanced accuracy with every slot acquired.
double full_acquisition_bacc(const Classifier& model, const std::vector<StudyRecord>& studies);

void save_classifier(const std::filesystem::path& stem, const Classifier& model, const nlohmann::json& extra_meta = {});
Classifier load_classifier(const std::filesystem::path& stem);

/// Finite-difference check of the mean cross-entropy on `states` for a
/// double-precision copy of the model.
nn::GradCheckReport grad_check_classifier(ClassifierModel<double>& model, std::span<const AcquisitionState> states,
                                          const std::vector<int>& labels, nn::GradCheckOptions options = {});

}  // namespace afa::classifier
