// afa: command-line driver for data generation, training, evaluation,
// lambda sweeps and pathway extraction. Every artifact except
// run_meta.json is a deterministic function of config + seed.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "afa/agent.hpp"
#include "afa/classifier.hpp"
#include "afa/config.hpp"
#include "afa/env.hpp"
#include "afa/json_util.hpp"
#include "afa/metrics.hpp"
#include "afa/neural/checkpoint.hpp"
#include "afa/pathway.hpp"
#include "afa/sweep.hpp"
#include "afa/synthgen.hpp"

namespace fs = std::filesystem;
using namespace afa;

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> lambda;
  std::string data;
  std::string classifier_ckpt;
  std::string agent_ckpt;
  std::string episodes;
};

struct Context {
  RunConfig config;
  fs::path out;
};

Context prepare(const Args& args, const std::string& command, int argc, char** argv) {
  Context ctx;
  if (!args.config.empty()) ctx.config = load_run_config(args.config);
  if (args.seed) ctx.config.seed = *args.seed;
  if (!args.out.empty()) ctx.config.out_dir = args.out;
  if (args.lambda) ctx.config.reward.lambda = *args.lambda;
  if (!args.data.empty()) ctx.config.data.path = args.data;
  if (command == "gen-data" && args.seed) ctx.config.generator.seed = *args.seed;
  ctx.config.validate();
  ctx.out = ctx.config.out_dir;
  fs::create_directories(ctx.out);
  echo_config(ctx.config, ctx.out);

  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream ts;
  ts << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  std::vector<std::string> argv_copy(argv, argv + argc);
  json_util::write_file(ctx.out / "run_meta.json", {{"command", command}, {"argv", argv_copy}, {"started_utc", ts.str()}});
  return ctx;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
}

Splits load_splits(const RunConfig& c) {
  if (c.data.path.empty()) throw Error("config", "no dataset given (set data.path or pass --data)");
  const auto ds = load_dataset(c.data.path, c.data.n_slots, c.data.feature_dim);
  return split_dataset(ds.studies, c.data.split, c.data.split_seed);
}

fs::path require_ckpt(const std::string& flag_value, const fs::path& fallback, const char* what) {
  const fs::path stem = flag_value.empty() ? fallback : fs::path(flag_value);
  if (!fs::exists(nn::manifest_path(stem)))
    throw Error("io", std::string(what) + " checkpoint not found: " + nn::manifest_path(stem).string());
  return stem;
}

void check_shape(const classifier::Classifier& model, const std::vector<StudyRecord>& studies) {
  if (studies.empty()) return;
  const classifier::InputShape shape{studies.front().n_slots(), studies.front().feature_dim()};
  if (model.shape() != shape)
    throw Error("architecture", "classifier checkpoint expects N=" + std::to_string(model.shape().n_slots) +
                                    ", D=" + std::to_string(model.shape().feature_dim) + " but the dataset has N=" +
                                    std::to_string(shape.n_slots) + ", D=" + std::to_string(shape.feature_dim));
}

void check_shape(const agent::QNetworkPair& pair, const std::vector<StudyRecord>& studies) {
  if (studies.empty()) return;
  if (pair.n_slots != studies.front().n_slots() || pair.feature_dim != studies.front().feature_dim())
    throw Error("architecture", "agent checkpoint does not match the dataset shape");
}

int cmd_gen_data(const Context& ctx) {
  const auto studies = synthgen::generate(ctx.config.generator);
  write_dataset(ctx.out / "studies.jsonl", studies);
  synthgen::write_spec(ctx.out / "generator.json", ctx.config.generator);
  const auto summary = summarize(studies);
  std::cout << "wrote " << summary.n_studies << " studies (N=" << summary.n_slots << ", D=" << summary.feature_dim
            << ") to " << (ctx.out / "studies.jsonl").string() << "\n";
  return 0;
}

int cmd_train_classifier(const Context& ctx) {
  const auto splits = load_splits(ctx.config);
  std::ostringstream log;
  log << "epoch,train_loss,masked_fraction,val_bacc\n";
  const auto trained = classifier::train_classifier(
      splits.train, splits.val, ctx.config.classifier, ctx.config.seed, [&](const classifier::EpochLog& e) {
        log << e.epoch << ',' << metrics::format_real(e.train_loss) << ',' << metrics::format_real(e.masked_fraction)
            << ',' << metrics::format_real(e.val_bacc) << '\n';
        std::cout << "epoch " << e.epoch << "  loss " << e.train_loss << "  val bACC " << e.val_bacc << "\n";
      });
  classifier::save_classifier(ctx.out / "classifier", trained.model,
                              {{"best_epoch", trained.best_epoch}, {"best_val_bacc", trained.best_val_bacc}});
  write_text(ctx.out / "classifier_log.csv", log.str());
  std::cout << "best epoch " << trained.best_epoch << " (val bACC " << trained.best_val_bacc << ")\n";
  return 0;
}

int cmd_train_agent(const Context& ctx, const Args& args) {
  const auto splits = load_splits(ctx.config);
  const auto model = classifier::load_classifier(require_ckpt(args.classifier_ckpt, ctx.out / "classifier", "classifier"));
  check_shape(model, splits.train);
  std::ostringstream log;
  log << "epoch,mean_reward,epsilon,val_bacc,val_mean_reward,mean_acquired_count,gradient_steps\n";
  const auto trained = agent::train_agent(
      splits.train, splits.val, model, ctx.config.reward, ctx.config.agent, ctx.config.seed,
      [&](const agent::AgentEpochLog& e) {
        log << e.epoch << ',' << metrics::format_real(e.mean_reward) << ',' << metrics::format_real(e.epsilon) << ','
            << metrics::format_real(e.val_bacc) << ',' << metrics::format_real(e.val_mean_reward) << ','
            << metrics::format_real(e.mean_acquired_count) << ',' << e.gradient_steps << '\n';
        std::cout << "epoch " << e.epoch << "  reward " << e.mean_reward << "  eps " << e.epsilon << "  val bACC "
                  << e.val_bacc << "  count " << e.mean_acquired_count << "\n";
      });
  agent::save_agent(ctx.out / "agent", trained.networks,
                    {{"best_epoch", trained.best_epoch},
                     {"best_val_bacc", trained.best_val_bacc},
                     {"lambda", ctx.config.reward.lambda}});
  write_text(ctx.out / "agent_log.csv", log.str());
  std::cout << "best epoch " << trained.best_epoch << " (val bACC " << trained.best_val_bacc << ")\n";
  return 0;
}

std::vector<env::EpisodeRecord> greedy_episodes(const Context& ctx, const Args& args,
                                                const std::vector<StudyRecord>& studies,
                                                const classifier::Classifier& model) {
  const auto pair = agent::load_agent(require_ckpt(args.agent_ckpt, ctx.out / "agent", "agent"));
  check_shape(pair, studies);
  return agent::rollout_all(pair.online, pair.config, model, studies, ctx.config.reward);
}

int cmd_eval(const Context& ctx, const Args& args) {
  const auto splits = load_splits(ctx.config);
  const auto& studies = pick_split(splits, ctx.config.eval.split);
  if (studies.empty()) throw Error("data", "evaluation split '" + ctx.config.eval.split + "' is empty");
  const auto model = classifier::load_classifier(require_ckpt(args.classifier_ckpt, ctx.out / "classifier", "classifier"));
  check_shape(model, studies);
  const auto episodes = greedy_episodes(ctx, args, studies, model);
  std::vector<int> preds, labels, counts;
  double reward = 0.0;
  for (const auto& e : episodes) {
    preds.push_back(e.predicted);
    labels.push_back(e.label);
    counts.push_back(e.acquired_count());
    reward += e.reward;
  }
  const auto report = metrics::make_report(preds, labels, counts, studies.front().n_slots());
  auto j = metrics::to_json(report);
  j["split"] = ctx.config.eval.split;
  j["lambda"] = ctx.config.reward.lambda;
  j["mean_reward"] = reward / static_cast<double>(episodes.size());
  j["full_acquisition_bacc"] = classifier::full_acquisition_bacc(model, studies);
  json_util::write_file(ctx.out / "eval_report.json", j);
  env::write_episodes(ctx.out / "episodes.jsonl", episodes);
  std::cout << "bACC " << report.bacc << "  F1 " << report.weighted_f1 << "  bMAE " << report.bmae << "  acquired "
            << report.acquired_count_mean << " (" << 100.0 * report.acquired_ratio << "%)\n";
  return 0;
}

int cmd_sweep(const Context& ctx, const Args& args) {
  const auto splits = load_splits(ctx.config);
  const auto& studies = pick_split(splits, ctx.config.eval.split);
  const auto model = classifier::load_classifier(require_ckpt(args.classifier_ckpt, ctx.out / "classifier", "classifier"));
  check_shape(model, splits.train);
  metrics::SweepInputs in{&splits.train, &splits.val, &studies, &model, ctx.config.agent};
  const int threads = metrics::threads_from_env(1);
  const auto result = metrics::lambda_sweep(in, ctx.config.eval.lambdas, ctx.config.eval.seeds, threads,
                                            [](const metrics::SweepRun& r) {
                                              std::cout << "lambda " << r.lambda << " seed " << r.seed << ": "
                                                        << (r.ok ? "ok" : "FAILED " + r.error) << "\n";
                                            });
  write_text(ctx.out / "sweep.csv", metrics::sweep_csv(result.rows));
  write_text(ctx.out / "sweep_runs.csv", metrics::sweep_runs_csv(result.runs));

  std::vector<double> budgets = ctx.config.eval.budgets;
  if (budgets.empty())
    for (const auto& r : result.rows)
      if (r.n_ok > 0) budgets.push_back(r.count);
  const auto baseline = metrics::random_mask_baseline(model, studies, budgets, ctx.config.eval.seeds);
  write_text(ctx.out / "curve.csv", metrics::curve_csv(metrics::f1_vs_count_curve(result.rows, baseline)));
  std::cout << metrics::sweep_csv(result.rows);
  for (const auto& r : result.rows)
    if (r.n_failed > 0) return 3;
  return 0;
}

int cmd_pathway(const Context& ctx, const Args& args) {
  const auto splits = load_splits(ctx.config);
  const auto& studies = pick_split(splits, ctx.config.eval.split);
  if (studies.empty()) throw Error("data", "evaluation split '" + ctx.config.eval.split + "' is empty");
  std::vector<env::EpisodeRecord> episodes;
  if (!args.episodes.empty()) {
    episodes = env::read_episodes(args.episodes);
  } else {
    const auto model =
        classifier::load_classifier(require_ckpt(args.classifier_ckpt, ctx.out / "classifier", "classifier"));
    check_shape(model, studies);
    episodes = greedy_episodes(ctx, args, studies, model);
  }
  const auto tree = metrics::pathway_tree(episodes, slot_names(studies.front()));
  write_text(ctx.out / "pathway.dot", tree.to_dot());
  json_util::write_file(ctx.out / "pathway.json", tree.to_json());
  const auto bad = tree.conservation_violations();
  std::cout << tree.nodes().size() << " nodes, " << tree.edges().size() << " edges over " << tree.n_episodes()
            << " episodes; conservation " << (bad.empty() ? "holds" : "VIOLATED") << "\n";
  return bad.empty() ? 0 : 4;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active feature acquisition: synthetic data, masked-attention classifier, DDQN acquisition agent"};
  app.require_subcommand(1);
  Args args;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "training seed (gen-data: generator seed)");
    sub->add_option("--out", args.out, "output directory");
    sub->add_option("--data", args.data, "studies.jsonl");
  };
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic benchmark");
  common(gen);
  auto* tc = app.add_subcommand("train-classifier", "train the masked-attention classifier");
  common(tc);
  auto* ta = app.add_subcommand("train-agent", "train the acquisition agent against a frozen classifier");
  common(ta);
  ta->add_option("--lambda", args.lambda, "acquisition cost coefficient");
  ta->add_option("--classifier-ckpt", args.classifier_ckpt, "classifier checkpoint stem");
  auto* ev = app.add_subcommand("eval", "greedy rollouts and metrics");
  common(ev);
  ev->add_option("--lambda", args.lambda, "acquisition cost coefficient (reward bookkeeping)");
  ev->add_option("--classifier-ckpt", args.classifier_ckpt, "classifier checkpoint stem");
  ev->add_option("--agent-ckpt", args.agent_ckpt, "agent checkpoint stem");
  auto* sw = app.add_subcommand("sweep", "train one agent per (lambda, seed)");
  common(sw);
  sw->add_option("--classifier-ckpt", args.classifier_ckpt, "classifier checkpoint stem");
  auto* pw = app.add_subcommand("pathway", "aggregate greedy rollouts into a pathway tree");
  common(pw);
  pw->add_option("--lambda", args.lambda, "acquisition cost coefficient (reward bookkeeping)");
  pw->add_option("--classifier-ckpt", args.classifier_ckpt, "classifier checkpoint stem");
  pw->add_option("--agent-ckpt", args.agent_ckpt, "agent checkpoint stem");
  pw->add_option("--episodes", args.episodes, "read episodes.jsonl instead of rolling out");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const Context ctx = prepare(args, command, argc, argv);
    if (command == "gen-data") return cmd_gen_data(ctx);
    if (command == "train-classifier") return cmd_train_classifier(ctx);
    if (command == "train-agent") return cmd_train_agent(ctx, args);
    if (command == "eval") return cmd_eval(ctx, args);
    if (command == "sweep") return cmd_sweep(ctx, args);
    if (command == "pathway") return cmd_pathway(ctx, args);
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 1;
}
