#include "doctest.h"

#include "fixtures.hpp"
#include "optlearn/demo.hpp"
#include "optlearn/smdp.hpp"

#include <cmath>
#include <sstream>

using namespace optlearn;
using optlearn::testing::chain;

namespace {

// Moves right from any of `from`, terminating on `stop`.
Option rightward(const GridWorld& gw, const std::vector<State>& from, State stop) {
  Option o;
  const auto n = static_cast<std::size_t>(gw.num_states());
  o.initiation.assign(n, 0);
  o.termination.assign(n, 0);
  o.policy.assign(n, -1);
  for (State s : from) {
    o.initiation[static_cast<std::size_t>(s)] = 1;
    o.policy[static_cast<std::size_t>(s)] = to_index(Action::Right);
  }
  o.termination[static_cast<std::size_t>(stop)] = 1;
  return o;
}

}  // namespace

TEST_SUITE("smdp") {

TEST_CASE("option reward is discounted within the option") {
  const auto gw = chain(5);
  const auto reward = RewardFunction::goal_reward(gw, 4);
  const auto o = rightward(gw, {0, 1, 2}, 3);
  const auto out = execute_option(gw, reward, o, 0, 0.9);
  CHECK(out.final_state == 3);
  CHECK(out.duration == 3);
  CHECK(out.reward == doctest::Approx(-2.71).epsilon(1e-14));
}

TEST_CASE("options take a step before checking termination") {
  const auto gw = chain(5);
  const auto reward = RewardFunction::goal_reward(gw, 4);
  auto o = rightward(gw, {0, 1, 2, 3}, 3);
  const auto out = execute_option(gw, reward, o, 3, 0.9);
  CHECK(out.duration == 1);
  CHECK(out.final_state == 4);
  CHECK(out.reward == 10.0);
}

TEST_CASE("options stop at the goal and at the edge of their domain") {
  const auto gw = chain(5);
  const auto reward = RewardFunction::goal_reward(gw, 2);
  const auto o = rightward(gw, {0, 1, 2, 3}, 4);
  const auto at_goal = execute_option(gw, reward, o, 0, 0.9);
  CHECK(at_goal.final_state == 2);
  CHECK(at_goal.duration == 2);
  CHECK(at_goal.reward == doctest::Approx(-1.0 + 0.9 * 10.0));

  const auto partial = rightward(gw, {0, 1}, 4);
  const auto free_reward = RewardFunction::goal_reward(gw, 4);
  const auto out = execute_option(gw, free_reward, partial, 0, 0.9);
  CHECK(out.final_state == 2);
  CHECK(out.duration == 2);
  CHECK_THROWS_AS(execute_option(gw, free_reward, partial, 3, 0.9), Error);
}

TEST_CASE("options that loop are cut off") {
  const auto gw = chain(3);
  const auto reward = RewardFunction::goal_reward(gw, 0);
  auto o = rightward(gw, {1, 2}, 0);
  CHECK_THROWS_AS(execute_option(gw, reward, o, 1, 0.9, 20), Error);
}

TEST_CASE("without options the learner is the primitive q-learner") {
  const auto gw = four_rooms();
  const auto reward = RewardFunction::goal_reward(gw, gw.state(7, 9));
  SmdpParams sp;
  sp.episodes = 50;
  QLearningParams qp;
  qp.episodes = 50;
  qp.seed = 42;
  const auto smdp = smdp_q_learning(gw, reward, {}, sp, 42);
  const auto q = q_learning(gw, reward, qp);
  CHECK(smdp.q == q.values);
  CHECK(smdp.steps.size() == 50);
}

TEST_CASE("smdp update uses discount to the option duration") {
  const auto gw = chain(5);
  const auto reward = RewardFunction::goal_reward(gw, 4);
  const auto o = rightward(gw, {0}, 3);
  SmdpParams p;
  p.alpha = 1.0;
  p.epsilon = 1.0;
  p.episodes = 300;
  const auto run = smdp_q_learning(gw, reward, {o}, p, 1);
  REQUIRE(run.q.cols() == 5);
  for (State s = 1; s < 5; ++s) CHECK(run.q(s, 4) == 0.0);
  CHECK(run.q(3, to_index(Action::Right)) == 10.0);
  CHECK(run.q(0, 4) == doctest::Approx(-2.71 + std::pow(0.9, 3) * 10.0).epsilon(1e-12));
}

TEST_CASE("parameter checks") {
  const auto gw = chain(3);
  const auto reward = RewardFunction::goal_reward(gw, 2);
  SmdpParams p;
  p.alpha = 0.0;
  CHECK_THROWS_AS(smdp_q_learning(gw, reward, {}, p, 1), Error);
  p = {};
  p.discount = 1.0;
  CHECK_THROWS_AS(smdp_q_learning(gw, reward, {}, p, 1), Error);
}

TEST_CASE("learning curve summary") {
  const auto c = summarize({{1, 2}, {3, 4}});
  CHECK(c.runs == 2);
  CHECK(c.mean[0] == 2.0);
  CHECK(c.mean[1] == 3.0);
  CHECK(c.stderr_[0] == doctest::Approx(1.0));
  CHECK(c.stderr_[1] == doctest::Approx(1.0));
  CHECK(summarize({{5, 6}}).stderr_.isZero());
  CHECK_THROWS_AS(summarize({{1, 2}, {3}}), Error);
}

TEST_CASE("comparison runs are seeded per goal, condition and run") {
  CHECK(run_seed(1, "G1", Condition::None, 0) != run_seed(1, "G2", Condition::None, 0));
  CHECK(run_seed(1, "G1", Condition::None, 0) != run_seed(1, "G1", Condition::Learned, 0));
  CHECK(run_seed(1, "G1", Condition::None, 0) != run_seed(1, "G1", Condition::None, 1));
  CHECK(run_seed(1, "G1", Condition::None, 0) == run_seed(1, "G1", Condition::None, 0));

  const auto gw = four_rooms();
  const auto hand = handcrafted_options(gw);
  SmdpParams p;
  p.episodes = 10;
  const std::vector<GoalSpec> goals = {{"G1", gw.state(7, 9)}};
  const auto a = compare(gw, {}, hand, goals, 2, p, 9);
  const auto b = compare(gw, {}, hand, goals, 2, p, 9);
  REQUIRE(a.size() == 3);
  CHECK(a[0].condition == Condition::None);
  CHECK(a[2].condition == Condition::Handcrafted);
  // No learned options: that condition replays the primitive runs' learner
  // under its own seeds.
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].curve.mean == b[i].curve.mean);
  CHECK_THROWS_AS(compare(gw, {}, hand, goals, 0, p, 9), Error);

  std::ostringstream csv;
  write_curves_csv(csv, a);
  std::string header;
  std::istringstream lines(csv.str());
  std::getline(lines, header);
  CHECK(header == "goal,condition,episode,mean_steps,stderr,runs");
  std::string first;
  std::getline(lines, first);
  CHECK(first.rfind("G1,none,1,", 0) == 0);
}

TEST_CASE("condition names and shortest-path baseline") {
  CHECK(to_string(Condition::None) == "none");
  CHECK(to_string(Condition::Learned) == "learned");
  CHECK(to_string(Condition::Handcrafted) == "handcrafted");
  CHECK(mean_shortest_path(chain(3), 2) == 1.5);
}

}  // TEST_SUITE
