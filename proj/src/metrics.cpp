#include "afa/metrics.hpp"

#include <cmath>
#include <cstdlib>

namespace afa::metrics {

namespace {

void check_inputs(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  if (preds.empty()) throw Error("metrics", "empty prediction set");
  if (preds.size() != labels.size()) throw Error("metrics", "predictions and labels differ in length");
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw Error("metrics", "label out of range");
    if (preds[i] < 0 || preds[i] >= n_classes) throw Error("metrics", "prediction out of range");
  }
}

}  // namespace

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  check_inputs(preds, labels, n_classes);
  ConfusionMatrix cm(n_classes, std::vector<long>(n_classes, 0));
  for (std::size_t i = 0; i < preds.size(); ++i) ++cm[labels[i]][preds[i]];
  return cm;
}

double balanced_accuracy(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  const auto cm = confusion_matrix(preds, labels, n_classes);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    long support = 0;
    for (long v : cm[c]) support += v;
    if (support == 0) continue;
    sum += static_cast<double>(cm[c][c]) / static_cast<double>(support);
    ++present;
  }
  return sum / present;
}

double weighted_f1(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  const auto cm = confusion_matrix(preds, labels, n_classes);
  double total = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    long support = 0, predicted = 0;
    for (int k = 0; k < n_classes; ++k) {
      support += cm[c][k];
      predicted += cm[k][c];
    }
    if (support == 0) continue;
    const double tp = static_cast<double>(cm[c][c]);
    // 2TP / (2TP + FP + FN) == harmonic mean of precision and recall.
    const double denom = static_cast<double>(support + predicted);
    const double f1 = denom > 0 ? 2.0 * tp / denom : 0.0;
    total += f1 * static_cast<double>(support);
  }
  return total / static_cast<double>(preds.size());
}

double balanced_mae(std::span<const int> preds, std::span<const int> labels, int n_classes) {
  check_inputs(preds, labels, n_classes);
  std::vector<double> err(n_classes, 0.0);
  std::vector<long> support(n_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    err[labels[i]] += std::abs(preds[i] - labels[i]);
    ++support[labels[i]];
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < n_classes; ++c) {
    if (support[c] == 0) continue;
    sum += err[c] / static_cast<double>(support[c]);
    ++present;
  }
  return sum / present;
}

AcquisitionStats acquisition_stats(std::span<const int> acquired_counts, int n_slots) {
  if (acquired_counts.empty()) throw Error("metrics", "no episodes");
  if (n_slots <= 0) throw Error("metrics", "n_slots must be positive");
  double sum = 0.0;
  for (int c : acquired_counts) sum += c;
  AcquisitionStats stats;
  stats.count_mean = sum / static_cast<double>(acquired_counts.size());
  stats.ratio = stats.count_mean / n_slots;
  return stats;
}

EvalReport make_report(std::span<const int> preds, std::span<const int> labels, std::span<const int> acquired_counts,
                       int n_slots) {
  EvalReport r;
  r.bacc = balanced_accuracy(preds, labels);
  r.weighted_f1 = weighted_f1(preds, labels);
  r.bmae = balanced_mae(preds, labels);
  const auto stats = acquisition_stats(acquired_counts, n_slots);
  r.acquired_ratio = stats.ratio;
  r.acquired_count_mean = stats.count_mean;
  r.confusion = confusion_matrix(preds, labels);
  r.n_studies = preds.size();
  for (int c = 0; c < kNumClasses; ++c) {
    long support = 0;
    for (long v : r.confusion[c]) support += v;
    if (support == 0) r.absent_classes.push_back(c);
  }
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"bacc", r.bacc},
          {"weighted_f1", r.weighted_f1},
          {"bmae", r.bmae},
          {"acquired_ratio", r.acquired_ratio},
          {"acquired_count_mean", r.acquired_count_mean},
          {"confusion", r.confusion},
          {"n_studies", r.n_studies},
          {"absent_classes", r.absent_classes}};
}

}  // namespace afa::metrics
