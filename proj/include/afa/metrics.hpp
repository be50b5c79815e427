#pragma once

#include <span>
#include <vector>

#include "afa/core.hpp"
#include "json.hpp"

namespace afa::metrics {

/// rows = true label, cols = prediction.
using ConfusionMatrix = std::vector<std::vector<long>>;

ConfusionMatrix confusion_matrix(std::span<const int> preds, std::span<const int> labels, int n_classes = kNumClasses);

/// Mean within-class recall over classes present in `labels`.
double balanced_accuracy(std::span<const int> preds, std::span<const int> labels, int n_classes = kNumClasses);

/// Support-weighted per-class F1; classes with zero support are excluded.
/// A class that is never predicted has precision (and F1) 0.
double weighted_f1(std::span<const int> preds, std::span<const int> labels, int n_classes = kNumClasses);

/// Mean over present classes of the class-conditional MAE |pred - label|.
double balanced_mae(std::span<const int> preds, std::span<const int> labels, int n_classes = kNumClasses);

struct AcquisitionStats {
  double ratio = 0.0;
  double count_mean = 0.0;
};

AcquisitionStats acquisition_stats(std::span<const int> acquired_counts, int n_slots);

struct EvalReport {
  double bacc = 0.0;
  double weighted_f1 = 0.0;
  double bmae = 0.0;
  double acquired_ratio = 0.0;
  double acquired_count_mean = 0.0;
  ConfusionMatrix confusion;
  std::size_t n_studies = 0;
  std::vector<int> absent_classes;  // dropped from bACC / bMAE averages
};

EvalReport make_report(std::span<const int> preds, std::span<const int> labels, std::span<const int> acquired_counts,
                       int n_slots);

nlohmann::json to_json(const EvalReport& report);

}  // namespace afa::metrics
