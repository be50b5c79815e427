#include "afa/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

namespace afa::metrics {

namespace {

struct Moments {
  double mean = 0.0;
  double std = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

SweepRun run_one(const SweepInputs& in, double lambda, std::uint64_t seed) {
  SweepRun run;
  run.lambda = lambda;
  run.seed = seed;
  try {
    const env::RewardSpec reward{lambda};
    const auto trained = agent::train_agent(*in.train, *in.val, *in.classifier, reward, in.agent, seed);
    const auto episodes = agent::rollout_all(trained.networks.online, in.agent, *in.classifier, *in.eval, reward);
    std::vector<int> preds, labels, counts;
    for (const auto& e : episodes) {
      preds.push_back(e.predicted);
      labels.push_back(e.label);
      counts.push_back(e.acquired_count());
    }
    run.report = make_report(preds, labels, counts, in.eval->front().n_slots());
    run.ok = true;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int threads_from_env(int fallback) {
  const char* raw = std::getenv("AFA_THREADS");
  if (!raw || !*raw) return fallback;
  int v = 0;
  const auto res = std::from_chars(raw, raw + std::char_traits<char>::length(raw), v);
  if (res.ec != std::errc{} || *res.ptr != '\0' || v < 1) throw Error("config", std::string("AFA_THREADS must be a positive integer, got '") + raw + "'");
  return v;
}

SweepResult lambda_sweep(const SweepInputs& in, const std::vector<double>& lambdas,
                         const std::vector<std::uint64_t>& seeds, int threads,
                         const std::function<void(const SweepRun&)>& on_run) {
  if (!in.train || !in.val || !in.eval || !in.classifier) throw Error("sweep", "sweep inputs incomplete");
  if (in.eval->empty()) throw Error("sweep", "sweep evaluation split is empty");
  if (lambdas.empty() || seeds.empty()) throw Error("sweep", "sweep needs at least one lambda and one seed");

  struct Job {
    double lambda;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double l : lambdas)
    for (auto s : seeds) jobs.push_back({l, s});

  SweepResult result;
  result.runs.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex report_mutex;
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
      result.runs[j] = run_one(in, jobs[j].lambda, jobs[j].seed);
      if (on_run) {
        std::lock_guard lock(report_mutex);
        on_run(result.runs[j]);
      }
    }
  };
  const int n_workers = std::clamp(threads, 1, static_cast<int>(jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.rows = summarize_runs(result.runs);
  return result;
}

std::vector<SweepRow> summarize_runs(const std::vector<SweepRun>& runs) {
  std::map<double, std::vector<const SweepRun*>> by_lambda;
  for (const auto& r : runs) by_lambda[r.lambda].push_back(&r);
  std::vector<SweepRow> rows;
  for (const auto& [lambda, group] : by_lambda) {
    SweepRow row;
    row.lambda = lambda;
    std::vector<double> bacc, f1, bmae, ratio, count;
    for (const auto* r : group) {
      if (!r->ok) {
        ++row.n_failed;
        continue;
      }
      ++row.n_ok;
      bacc.push_back(r->report.bacc);
      f1.push_back(r->report.weighted_f1);
      bmae.push_back(r->report.bmae);
      ratio.push_back(r->report.acquired_ratio);
      count.push_back(r->report.acquired_count_mean);
    }
    const auto b = moments(bacc), f = moments(f1), m = moments(bmae);
    row.bacc_mean = b.mean, row.bacc_std = b.std;
    row.f1_mean = f.mean, row.f1_std = f.std;
    row.bmae_mean = m.mean, row.bmae_std = m.std;
    row.ratio = moments(ratio).mean;
    row.count = moments(count).mean;
    rows.push_back(row);
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << format_real(r.lambda);
    if (r.n_ok == 0) {
      for (int i = 0; i < 8; ++i) os << ",failed";
    } else {
      for (double v : {r.bacc_mean, r.bacc_std, r.f1_mean, r.f1_std, r.bmae_mean, r.bmae_std, r.ratio, r.count})
        os << ',' << format_real(v);
    }
    os << '\n';
  }
  return os.str();
}

std::string sweep_runs_csv(const std::vector<SweepRun>& runs) {
  std::ostringstream os;
  os << "lambda,seed,status,bacc,f1,bmae,ratio,count,error\n";
  for (const auto& r : runs) {
    os << format_real(r.lambda) << ',' << r.seed << ',' << (r.ok ? "ok" : "failed");
    if (r.ok) {
      for (double v : {r.report.bacc, r.report.weighted_f1, r.report.bmae, r.report.acquired_ratio,
                       r.report.acquired_count_mean})
        os << ',' << format_real(v);
      os << ",\n";
    } else {
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << ",,,,,,\"" << msg << "\"\n";
    }
  }
  return os.str();
}

std::vector<CurvePoint> random_mask_baseline(const classifier::Classifier& classifier,
                                             const std::vector<StudyRecord>& studies,
                                             const std::vector<double>& budgets,
                                             const std::vector<std::uint64_t>& seeds) {
  std::vector<CurvePoint> out;
  if (studies.empty()) return out;
  const int n = studies.front().n_slots();
  std::vector<int> labels;
  for (const auto& s : studies) labels.push_back(s.label);
  for (double budget : budgets) {
    if (!(budget >= 0.0 && budget <= n)) throw Error("sweep", "budget " + format_real(budget) + " outside [0, N]");
    const int base = static_cast<int>(std::floor(budget));
    const double extra = budget - base;
    std::vector<double> f1s;
    long acquired = 0;
    for (auto seed : seeds) {
      std::mt19937_64 rng(seed ^ 0x72616e646dULL);
      std::bernoulli_distribution bump(extra);
      std::vector<AcquisitionState> states;
      states.reserve(studies.size());
      std::vector<int> order(static_cast<std::size_t>(n));
      for (const auto& s : studies) {
        const int k = std::min(n, base + (bump(rng) ? 1 : 0));
        acquired += k;
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        Mask mask(static_cast<std::size_t>(n), false);
        for (int i = 0; i < k; ++i) mask[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
        states.push_back(apply_mask(s, mask));
      }
      const auto preds = classifier::predict_labels(classifier, states);
      f1s.push_back(weighted_f1(preds, labels));
    }
    const auto m = moments(f1s);
    const double count = seeds.empty() ? budget
                                       : static_cast<double>(acquired) /
                                             static_cast<double>(seeds.size() * studies.size());
    out.push_back({"random_mask", count, m.mean, m.std});
  }
  return out;
}

std::vector<CurvePoint> f1_vs_count_curve(const std::vector<SweepRow>& rows, const std::vector<CurvePoint>& baseline) {
  std::vector<CurvePoint> points;
  for (const auto& r : rows)
    if (r.n_ok > 0) points.push_back({"rl", r.count, r.f1_mean, r.f1_std});
  points.insert(points.end(), baseline.begin(), baseline.end());
  auto key = [](const CurvePoint& p) { return std::tie(p.series, p.count, p.f1_mean, p.f1_std); };
  std::sort(points.begin(), points.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  return points;
}

std::string curve_csv(std::vector<CurvePoint> points) {
  auto key = [](const CurvePoint& p) { return std::tie(p.series, p.count, p.f1_mean, p.f1_std); };
  std::sort(points.begin(), points.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  std::ostringstream os;
  os << kCurveHeader << '\n';
  for (const auto& p : points)
    os << p.series << ',' << format_real(p.count) << ',' << format_real(p.f1_mean) << ',' << format_real(p.f1_std)
       << '\n';
  return os.str();
}

}  // namespace afa::metrics
