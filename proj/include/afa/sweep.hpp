#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "afa/agent.hpp"
#include "afa/classifier.hpp"
#include "afa/metrics.hpp"

namespace afa::metrics {

struct SweepRun {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
};

/// Mean and sample std over the successful seeds of one lambda.
struct SweepRow {
  double lambda = 0.0;
  int n_ok = 0;
  int n_failed = 0;
  double bacc_mean = 0.0, bacc_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
  double bmae_mean = 0.0, bmae_std = 0.0;
  double ratio = 0.0;
  double count = 0.0;
};

struct SweepResult {
  std::vector<SweepRun> runs;  // lambda-major, then seed, in input order
  std::vector<SweepRow> rows;  // sorted by lambda
};

struct SweepInputs {
  const std::vector<StudyRecord>* train = nullptr;
  const std::vector<StudyRecord>* val = nullptr;
  const std::vector<StudyRecord>* eval = nullptr;  // studies the reported metrics are computed on
  const classifier::Classifier* classifier = nullptr;
  agent::AgentConfig agent;
};

/// Trains one agent per (lambda, seed) and evaluates it with greedy rollouts.
/// A failed run is kept as a marker and excluded from its row. Runs are
/// spread over `threads` workers; results do not depend on the count.
SweepResult lambda_sweep(const SweepInputs& inputs, const std::vector<double>& lambdas,
                         const std::vector<std::uint64_t>& seeds, int threads = 1,
                         const std::function<void(const SweepRun&)>& on_run = {});

std::vector<SweepRow> summarize_runs(const std::vector<SweepRun>& runs);

inline constexpr const char* kSweepHeader = "lambda,bacc_mean,bacc_std,f1_mean,f1_std,bmae_mean,bmae_std,ratio,count";

/// Rows with no successful seed print "failed" in every metric column.
std::string sweep_csv(const std::vector<SweepRow>& rows);
/// One line per run with status and error text.
std::string sweep_runs_csv(const std::vector<SweepRun>& runs);

struct CurvePoint {
  std::string series;  // "rl" or "random_mask"
  double count = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
};

/// Without-RL reference: for each budget b, every study gets a uniformly
/// random subset of floor(b) or floor(b)+1 slots, the larger size with
/// probability frac(b), so the expected count is b. One pass per seed; the
/// reported count is the realized mean.
std::vector<CurvePoint> random_mask_baseline(const classifier::Classifier& classifier,
                                             const std::vector<StudyRecord>& studies,
                                             const std::vector<double>& budgets,
                                             const std::vector<std::uint64_t>& seeds);

/// Sorted union of the RL points (taken from sweep rows) and the baseline.
std::vector<CurvePoint> f1_vs_count_curve(const std::vector<SweepRow>& rows, const std::vector<CurvePoint>& baseline);

inline constexpr const char* kCurveHeader = "series,count,f1_mean,f1_std";
std::string curve_csv(std::vector<CurvePoint> points);

/// Canonical decimal text for CSV cells (round-trips doubles).
std::string format_real(double v);

int threads_from_env(int fallback = 1);

}  // namespace afa::metrics
