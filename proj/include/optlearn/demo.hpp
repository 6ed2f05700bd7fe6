#pragma once

#include "optlearn/gridworld.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace optlearn {

struct Step {
  State state = 0;
  Action action = Action::Up;
  friend bool operator==(const Step&, const Step&) = default;
};

/// A demonstration: the (state, action) pairs taken, plus where they led.
struct Trajectory {
  int id = 0;
  State goal = 0;
  std::vector<Step> steps;
  State final_state = 0;

  int length() const { return static_cast<int>(steps.size()); }
  /// Visited states: every step state followed by the final state.
  std::vector<State> states() const;
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// True when consecutive states follow `gw.step`.
bool dynamics_consistent(const GridWorld& gw, const Trajectory& traj);

struct QLearningParams {
  double alpha = 0.5;
  double epsilon = 0.1;
  double discount = 0.9;
  int episodes = 5000;
  std::uint64_t seed = 0;
  int max_episode_steps = 10000;
};

/// Tabular one-step Q-learning with epsilon-greedy exploration and uniform
/// random non-terminal start states.
QTable q_learning(const GridWorld& gw, const RewardFunction& reward, const QLearningParams& params);
/// Continues learning from an existing table.
QTable q_learning(const GridWorld& gw, const RewardFunction& reward, const QLearningParams& params, QTable init);

/// Fraction of non-terminal states whose greedy action under `learned` is
/// also optimal under `oracle` (within `tol` of the oracle's best value).
double greedy_agreement(const QTable& learned, const QTable& oracle, const RewardFunction& reward, double tol = 1e-9);

struct DemoParams {
  QLearningParams learner;  // seed is overridden per goal
  /// Extra Q-learning batches allowed when the greedy rollout is not yet a shortest path.
  int max_refinements = 6;
};

/// `n` demonstrations with uniformly random start and goal states. Each goal's
/// policy is learned once by Q-learning and reused.
std::vector<Trajectory> generate_demos(const GridWorld& gw, int n, std::uint64_t seed, const DemoParams& params = {});

/// One JSON object per line: {"id":..,"goal":..,"steps":[[state,action],...]}.
void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajs);
void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajs);
std::vector<Trajectory> read_trajectories(std::istream& in, const GridWorld& gw);
std::vector<Trajectory> read_trajectories(const std::string& path, const GridWorld& gw);

}  // namespace optlearn
