#pragma once

#include "optlearn/gridworld.hpp"
#include "optlearn/options.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace optlearn {

struct OptionOutcome {
  State final_state = 0;
  double reward = 0.0;  // sum over t < k of discount^t r_t
  int duration = 0;     // primitive steps k >= 1
};

/// Runs an option from `s`. At least one step is taken before termination is
/// tested; the option also stops at absorbing states and when it leaves its
/// policy domain. Throws when `s` is outside the domain or after `max_steps`.
OptionOutcome execute_option(const GridWorld& gw, const RewardFunction& reward, const Option& option, State s,
                             double discount, int max_steps = kMaxOptionSteps);

struct SmdpParams {
  double alpha = 0.5;
  double epsilon = 0.1;
  double discount = 0.9;
  int episodes = 200;
  int max_episode_steps = 10000;
};

/// Q over states x (4 primitives, then options in the given order).
struct SmdpRun {
  Eigen::MatrixXd q;
  std::vector<int> steps;  // primitive steps per episode
};

/// SMDP Q-learning with epsilon-greedy choice among eligible actions and
/// options. Without options this is step-for-step the primitive learner.
SmdpRun smdp_q_learning(const GridWorld& gw, const RewardFunction& reward, const std::vector<Option>& options,
                        const SmdpParams& params, std::uint64_t seed);

struct LearningCurve {
  Eigen::VectorXd mean;
  Eigen::VectorXd stderr_;  // sample standard deviation / sqrt(runs)
  int runs = 0;
};

/// Per-episode mean and standard error over runs of equal length.
LearningCurve summarize(const std::vector<std::vector<int>>& runs);

enum class Condition { None = 0, Learned = 1, Handcrafted = 2 };
std::string to_string(Condition c);

struct CurveGroup {
  std::string goal_label;
  State goal = 0;
  Condition condition = Condition::None;
  LearningCurve curve;
};

struct GoalSpec {
  std::string label;
  State state = 0;
};

/// For every goal and condition, `runs` independent runs whose seeds depend
/// only on (seed, goal label, condition, run).
std::vector<CurveGroup> compare(const GridWorld& gw, const std::vector<Option>& learned,
                                const std::vector<Option>& handcrafted, const std::vector<GoalSpec>& goals, int runs,
                                const SmdpParams& params, std::uint64_t seed);

/// The run seed used by `compare`.
std::uint64_t run_seed(std::uint64_t seed, const std::string& goal_label, Condition c, int run);

/// Header `goal,condition,episode,mean_steps,stderr,runs`, episodes from 1.
void write_curves_csv(std::ostream& out, const std::vector<CurveGroup>& groups);

/// Mean BFS distance to `goal` over every other state.
double mean_shortest_path(const GridWorld& gw, State goal);

}  // namespace optlearn
