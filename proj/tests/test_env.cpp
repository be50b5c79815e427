#include <cmath>
#include <random>

#include "afa/env.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace afa;
using env::RewardSpec;

namespace {

env::LabelFn constant(int label) {
  return [label](const AcquisitionState&) { return label; };
}

AcquisitionState acquire_all(const StudyRecord& s, const std::vector<int>& slots) {
  auto st = env::reset(s);
  for (int i : slots) st = env::step(s, st, Action::acquire(i), {0.0}, constant(0)).next;
  return st;
}

}  // namespace

TEST_CASE("reset is zero-initialized and matches an empty mask") {
  std::mt19937_64 rng(1);
  const auto s = test::random_study(rng, 4, 5);
  const auto a = env::reset(s), b = env::reset(s);
  CHECK(a.mask == Mask(4, false));
  CHECK(a.features.rows() == 4);
  CHECK(a.features.cols() == 5);
  CHECK(a.features.isZero(0.0));
  CHECK(a.steps_taken == 0);
  CHECK(a == b);
  CHECK(a == apply_mask(s, Mask(4, false)));
}

TEST_CASE("Acquire(2) from reset") {
  std::mt19937_64 rng(2);
  const auto s = test::random_study(rng);
  const auto r = env::step(s, env::reset(s), Action::acquire(2), {0.1}, constant(s.label));
  CHECK(r.next.mask == Mask{false, false, true, false});
  CHECK(r.next.features.row(2).transpose() == s.slots[2].features);
  CHECK(r.reward == 0.0);
  CHECK_FALSE(r.done);
  CHECK(r.next.steps_taken == 1);
}

TEST_CASE("terminal reward arithmetic") {
  std::mt19937_64 rng(3);
  const auto s = test::random_study(rng, 4, 6, 1);
  const auto two = acquire_all(s, {0, 3});
  const auto good = env::step(s, two, Action::terminate(), {0.01}, constant(1));
  CHECK(good.done);
  CHECK(good.reward == doctest::Approx(0.98).epsilon(1e-12));

  const auto three = acquire_all(s, {0, 1, 2});
  const auto bad = env::step(s, three, Action::terminate(), {0.1}, constant(2));
  CHECK(bad.reward == doctest::Approx(-0.3).epsilon(1e-12));

  CHECK(env::terminal_reward(true, 0.0, 4.0) == 1.0);
  CHECK(env::terminal_reward(false, 0.5, 0.0) == 0.0);
}

TEST_CASE("the classifier sees the state before Terminate") {
  std::mt19937_64 rng(4);
  const auto s = test::random_study(rng);
  const auto st = acquire_all(s, {1});
  Mask seen;
  env::step(s, st, Action::terminate(), {0.0}, [&](const AcquisitionState& x) {
    seen = x.mask;
    return 0;
  });
  CHECK(seen == st.mask);
}

TEST_CASE("fifth acquire-path action times out with reward exactly zero") {
  std::mt19937_64 rng(5);
  const auto s = test::random_study(rng, 4, 6, 0);
  auto st = env::reset(s);
  std::vector<int> order{3, 1, 0, 2, 1};
  env::StepResult r;
  for (std::size_t k = 0; k < order.size(); ++k) {
    r = env::step(s, st, Action::acquire(order[k]), {0.25}, constant(0), true);
    if (k + 1 < order.size()) {
      CHECK_FALSE(r.done);
      st = r.next;
    }
  }
  CHECK(r.done);
  CHECK(r.timeout);
  CHECK(r.reward == 0.0);
  CHECK(std::signbit(r.reward) == false);
  CHECK_THROWS_AS(env::step(s, r.next, Action::terminate(), {0.0}, constant(0)), Error);
}

TEST_CASE("step rejects invalid use") {
  std::mt19937_64 rng(6);
  const auto s = test::random_study(rng);
  const auto st = acquire_all(s, {1});
  CHECK_THROWS_AS(env::step(s, st, Action::acquire(1), {0.0}, constant(0)), Error);
  CHECK_NOTHROW(env::step(s, st, Action::acquire(1), {0.0}, constant(0), true));
  CHECK_THROWS_AS(env::step(s, st, Action::acquire(7), {0.0}, constant(0)), Error);
  const auto done = env::step(s, st, Action::terminate(), {0.0}, constant(0)).next;
  CHECK_THROWS_AS(env::step(s, done, Action::acquire(0), {0.0}, constant(0)), Error);
  CHECK_THROWS_AS((RewardSpec{-0.1}.validate()), Error);
}

TEST_CASE("action_mask cases") {
  std::mt19937_64 rng(7);
  const auto s = test::random_study(rng);
  CHECK(env::action_mask(env::reset(s)) == std::vector<bool>(5, true));
  const auto full = acquire_all(s, {0, 1, 2, 3});
  CHECK(env::action_mask(full) == std::vector<bool>{true, false, false, false, false});
  CHECK(env::action_mask(full, true) == std::vector<bool>(5, true));
  CHECK(env::action_mask(acquire_all(s, {2})) == std::vector<bool>{true, true, true, false, true});
}

TEST_CASE("re-acquisition is a no-op on features and cost") {
  std::mt19937_64 rng(8);
  const auto s = test::random_study(rng);
  const auto once = acquire_all(s, {2});
  const auto twice = env::step(s, once, Action::acquire(2), {0.0}, constant(0), true).next;
  CHECK(twice.features == once.features);
  CHECK(twice.mask == once.mask);
  CHECK(env::acquired_cost(s, twice) == env::acquired_cost(s, once));
}

TEST_CASE("random action sequences respect the MDP contract (1e4)") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> lam(0.0, 0.5), cost(0.0, 2.0);
  for (int trial = 0; trial < 10000; ++trial) {
    auto s = test::random_study(rng, 4, 3);
    for (auto& slot : s.slots) slot.cost = trial % 2 ? 1.0 : cost(rng);
    const bool reselect = trial % 3 == 0;
    const RewardSpec spec{lam(rng)};
    const int guess = static_cast<int>(rng() % 3);
    auto st = env::reset(s);
    int length = 0;
    bool done = false;
    env::StepResult r;
    while (!done) {
      const auto valid = env::action_mask(st, reselect);
      std::vector<int> options;
      for (std::size_t a = 0; a < valid.size(); ++a)
        if (valid[a]) options.push_back(static_cast<int>(a));
      // Bias toward acquisition so timeouts are exercised.
      int index = options[rng() % options.size()];
      if (index == 0 && options.size() > 1 && rng() % 4 != 0) index = options[1 + rng() % (options.size() - 1)];
      r = env::step(s, st, Action::from_index(index, 4), spec, constant(guess), reselect);
      ++length;
      done = r.done;
      REQUIRE(r.done == (index == 0 || r.next.steps_taken == 5));
      if (!done) {
        REQUIRE(r.reward == 0.0);
        st = r.next;
      }
    }
    REQUIRE(length <= 5);
    if (r.timeout) {
      REQUIRE(r.reward == 0.0);
    } else {
      const double indicator = r.reward + spec.lambda * env::acquired_cost(s, st);
      REQUIRE(std::abs(indicator - (guess == s.label ? 1.0 : 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("episode records round-trip through JSON lines") {
  env::EpisodeRecord a;
  a.study_id = "s7";
  a.actions = {1, 3, 0};
  a.terminal_mask = {true, false, true, false};
  a.reward = 0.9;
  a.predicted = 2;
  a.label = 2;
  env::EpisodeRecord b = a;
  b.study_id = "s8";
  b.actions = {2, 1, 3, 4, 2};
  b.terminal_mask = Mask(4, true);
  b.reward = 0.0;
  b.timeout = true;
  CHECK(a.acquired_count() == 2);
  const auto dir = test::temp_dir("episodes");
  env::write_episodes(dir / "e.jsonl", {a, b});
  const auto back = env::read_episodes(dir / "e.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].actions == a.actions);
  CHECK(back[0].terminal_mask == a.terminal_mask);
  CHECK(back[0].reward == a.reward);
  CHECK(back[1].timeout);
  CHECK(back[1].acquired_count() == 4);
  env::write_episodes(dir / "f.jsonl", back);
  CHECK(test::slurp(dir / "e.jsonl") == test::slurp(dir / "f.jsonl"));
}
