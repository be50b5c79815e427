#include <array>
#include <random>

#include "afa/agent.hpp"
#include "afa/synthgen.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace afa;
using agent::AgentConfig;
using agent::QNetwork;
using nn::Mat;

namespace {

// A network whose output is `values` for every input.
QNetwork<float> constant_net(int input_dim, const std::vector<float>& values) {
  QNetwork<float> net(input_dim, {8}, static_cast<int>(values.size()), 3);
  auto& out = net.output_layer();
  out.W.value.setZero();
  for (std::size_t i = 0; i < values.size(); ++i) out.b.value(0, static_cast<Eigen::Index>(i)) = values[i];
  return net;
}

env::TransitionRecord transition(const StudyRecord& s, const Mask& next_mask, double reward, bool done) {
  env::TransitionRecord t;
  t.state = env::reset(s);
  t.next_state = apply_mask(s, next_mask);
  t.reward = reward;
  t.done = done;
  return t;
}

AgentConfig small_agent(int epochs) {
  AgentConfig c;
  c.epochs = epochs;
  c.hidden = {32, 32};
  c.batch_size = 16;
  c.target_sync = 50;
  return c;
}

}  // namespace

TEST_CASE("zero output weights make Q equal the output bias") {
  std::mt19937_64 rng(1);
  const auto net = constant_net(24, {0.5f, -1.0f, 2.0f, 0.0f, 3.5f});
  for (int t = 0; t < 20; ++t) {
    const auto s = test::random_study(rng);
    const auto q = agent::q_values(net, apply_mask(s, test::random_mask(rng, 4)), false);
    CHECK(q == Eigen::VectorXd((Eigen::VectorXd(5) << 0.5, -1.0, 2.0, 0.0, 3.5).finished()));
  }
}

TEST_CASE("select_action examples") {
  std::mt19937_64 rng(2);
  Eigen::VectorXd q(5);
  q << 0.1, 0.9, 0.3, 0.2, 0.0;
  CHECK(agent::select_action(q, std::vector<bool>(5, true), 0.0, rng).index() == 1);
  CHECK(agent::select_action(q, {true, false, true, true, true}, 0.0, rng).index() == 2);
  Eigen::VectorXd tie(3);
  tie << 0.4, 0.7, 0.7;
  CHECK(agent::select_action(tie, std::vector<bool>(3, true), 0.0, rng).index() == 1);
  CHECK_THROWS_AS(agent::select_action(q, std::vector<bool>(5, false), 0.0, rng), Error);

  std::array<long, 5> hits{};
  const std::vector<bool> valid{true, false, true, false, true};
  for (int t = 0; t < 100000; ++t) ++hits[agent::select_action(q, valid, 1.0, rng).index()];
  CHECK(hits[1] == 0);
  CHECK(hits[3] == 0);
  for (int a : {0, 2, 4}) CHECK(std::abs(hits[a] / 1e5 - 1.0 / 3) <= 0.01);
}

TEST_CASE("epsilon decays linearly over the first 60% of episodes") {
  AgentConfig c;
  CHECK(agent::epsilon_at(c, 0, 1000) == 1.0);
  CHECK(agent::epsilon_at(c, 300, 1000) == doctest::Approx(0.525).epsilon(1e-12));
  CHECK(agent::epsilon_at(c, 600, 1000) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(agent::epsilon_at(c, 999, 1000) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("ddqn_target micro-batches") {
  std::mt19937_64 rng(3);
  const auto s = test::random_study(rng, 2, 3);
  const int dim = agent::state_input_dim(2, 3, false);
  const auto online = constant_net(dim, {0.1f, 0.5f, 0.2f});
  const auto target = constant_net(dim, {1.0f, 2.0f, 3.0f});

  const auto done = transition(s, {true, true}, 0.98, true);
  const auto open = transition(s, {false, false}, 0.0, false);
  const auto slot0_taken = transition(s, {true, false}, 0.0, false);
  const std::vector<const env::TransitionRecord*> batch{&done, &open, &slot0_taken};
  const auto y = agent::ddqn_target(batch, online, target, 1.0, false, false);
  CHECK(y[0] == doctest::Approx(0.98).epsilon(1e-12));
  CHECK(y[1] == 2.0);
  CHECK(y[2] == 3.0);

  const auto y_half = agent::ddqn_target(batch, online, target, 0.5, false, false);
  CHECK(y_half[1] == 1.0);
  CHECK(agent::ddqn_target(batch, online, target, 1.0, true, false)[2] == 2.0);
}

TEST_CASE("target values are frozen between syncs") {
  std::mt19937_64 rng(4);
  const auto s = test::random_study(rng, 4, 6);
  AgentConfig c = small_agent(1);
  agent::QNetworkPair pair(4, 6, c, 5);
  // All slots acquired leaves only Terminate valid, so the online argmax is fixed.
  std::vector<env::TransitionRecord> items;
  for (int k = 0; k < 8; ++k) {
    auto t = transition(test::random_study(rng, 4, 6), Mask(4, true), 0.0, false);
    items.push_back(t);
  }
  std::vector<const env::TransitionRecord*> batch;
  for (const auto& t : items) batch.push_back(&t);
  const auto before = agent::ddqn_target(batch, pair.online, pair.target, 1.0, false, false);
  for (auto* p : pair.online.parameters()) p->value.array() += 0.5f;
  CHECK(agent::ddqn_target(batch, pair.online, pair.target, 1.0, false, false) == before);
  pair.sync_target();
  CHECK(agent::ddqn_target(batch, pair.online, pair.target, 1.0, false, false) != before);
}

TEST_CASE("replay buffer is a FIFO ring of fixed capacity") {
  std::mt19937_64 rng(6);
  const auto s = test::random_study(rng);
  agent::ReplayBuffer buf(3);
  CHECK_THROWS_AS(buf.sample(1, rng), Error);
  for (int k = 0; k < 5; ++k) buf.push(transition(s, Mask(4, false), k, false));
  CHECK(buf.size() == 3);
  CHECK(buf.at(0).reward == 2.0);
  CHECK(buf.at(1).reward == 3.0);
  CHECK(buf.at(2).reward == 4.0);
  CHECK_THROWS_AS(buf.at(3), Error);
  std::array<int, 5> seen{};
  for (const auto* t : buf.sample(3000, rng)) ++seen[static_cast<int>(t->reward)];
  CHECK(seen[0] + seen[1] == 0);
  for (int k = 2; k < 5; ++k) CHECK(std::abs(seen[k] - 1000) < 120);
  CHECK_THROWS_AS(agent::ReplayBuffer(0), Error);
}

TEST_CASE("Q-network gradient check at random init (double)") {
  std::mt19937_64 rng(7);
  QNetwork<double> net(64, {256, 256}, 5, 8);
  Mat<double> x = Mat<double>::Random(4, 64);
  const auto report = agent::grad_check_qnetwork(net, x, {0, 3, 4, 1}, {0.5, -0.2, 1.0, 0.0});
  INFO("worst " << report.worst_param << " " << report.max_rel_error);
  CHECK(report.passed());
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("greedy rollouts: Terminate-first policy and no repeats") {
  std::mt19937_64 rng(9);
  const auto s = test::random_study(rng);
  AgentConfig c;
  const auto stop = constant_net(24, {1.0f, 0.0f, 0.0f, 0.0f, 0.0f});
  const auto e = agent::rollout_greedy(stop, c, [](const AcquisitionState&) { return 1; }, s, {0.1});
  CHECK(e.actions == std::vector<int>{0});
  CHECK(e.acquired_count() == 0);
  CHECK(e.reward == (s.label == 1 ? 1.0 : 0.0));

  const auto greedy = constant_net(24, {-1.0f, 0.3f, 0.1f, 0.9f, 0.2f});
  const auto g = agent::rollout_greedy(greedy, c, [](const AcquisitionState&) { return 0; }, s, {0.0});
  CHECK(g.actions == std::vector<int>{3, 1, 4, 2, 0});
  CHECK(g.acquired_count() == 4);
  CHECK_FALSE(g.timeout);

  AgentConfig loose = c;
  loose.allow_reselect = true;
  const auto t = agent::rollout_greedy(greedy, loose, [&](const AcquisitionState&) { return s.label; }, s, {0.0});
  CHECK(t.timeout);
  CHECK(t.actions.size() == 5);
  CHECK(t.reward == 0.0);
  CHECK(t.predicted == s.label);
}

TEST_CASE("one-study set at lambda 0 reaches reward 1") {
  const auto toy = test::toy_studies();
  classifier::ClassifierConfig cc;
  cc.n_layers = 2;
  cc.epochs = 60;
  const auto clf = classifier::train_classifier(toy, toy, cc, 1);
  const std::vector<StudyRecord> one{toy[0]};
  REQUIRE(classifier::full_acquisition_bacc(clf.model, one) == 1.0);
  AgentConfig c;
  c.epochs = 50;
  const auto trained = agent::train_agent(one, one, clf.model, {0.0}, c, 2);
  const auto eps = agent::rollout_all(trained.networks.online, c, clf.model, one, {0.0});
  CHECK(eps[0].reward == 1.0);
}

TEST_CASE("training is deterministic and checkpoints round-trip") {
  synthgen::GeneratorSpec spec;
  spec.n_studies = 60;
  const auto studies = synthgen::generate(spec);
  const auto parts = split_dataset(studies, {0.7, 0.3, 0.0}, 1);
  classifier::ClassifierConfig cc;
  cc.n_layers = 1;
  cc.n_heads = 2;
  cc.ff_dim = 16;
  cc.model_dim = 8;
  cc.epochs = 2;
  const auto clf = classifier::train_classifier(parts.train, parts.val, cc, 1);
  const auto c = small_agent(3);
  const auto a = agent::train_agent(parts.train, parts.val, clf.model, {0.05}, c, 4);
  const auto b = agent::train_agent(parts.train, parts.val, clf.model, {0.05}, c, 4);
  REQUIRE(a.log.size() == 3);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
    CHECK(a.log[i].val_bacc == b.log[i].val_bacc);
    CHECK(a.log[i].gradient_steps == b.log[i].gradient_steps);
  }
  CHECK(a.log.back().gradient_steps > 0);

  const auto dir = test::temp_dir("agent_ckpt");
  agent::save_agent(dir / "a", a.networks, {{"lambda", 0.05}});
  agent::save_agent(dir / "b", b.networks, {{"lambda", 0.05}});
  CHECK(test::slurp(dir / "a.bin") == test::slurp(dir / "b.bin"));
  const auto loaded = agent::load_agent(dir / "a");
  CHECK(agent::read_agent_meta(dir / "a").at("kind") == "agent");
  for (const auto& s : parts.val) {
    const auto st = env::reset(s);
    CHECK(agent::q_values(loaded.online, st, false) == agent::q_values(a.networks.online, st, false));
    CHECK(agent::q_values(loaded.target, st, false) == agent::q_values(a.networks.target, st, false));
  }
  CHECK_THROWS_AS(classifier::load_classifier(dir / "a"), Error);

  for (const auto& e : agent::rollout_all(a.networks.online, c, clf.model, parts.val, {0.05})) {
    std::vector<int> acquires;
    for (int x : e.actions)
      if (x > 0) acquires.push_back(x);
    std::sort(acquires.begin(), acquires.end());
    CHECK(std::adjacent_find(acquires.begin(), acquires.end()) == acquires.end());
    CHECK(e.actions.size() <= 5);
  }
}

TEST_CASE("agent config JSON is strict") {
  AgentConfig c;
  c.hidden = {64, 32};
  c.append_mask = true;
  const auto back = agent::config_from_json(agent::to_json(c));
  CHECK(back.hidden == c.hidden);
  CHECK(back.append_mask);
  CHECK(back.gamma == 1.0);
  CHECK_THROWS_AS(agent::config_from_json({{"discount", 0.9}}), Error);
  CHECK_THROWS_AS(agent::config_from_json({{"batch_size", 0}}), Error);
}
