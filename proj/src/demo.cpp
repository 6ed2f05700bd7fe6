#include "optlearn/demo.hpp"

#include "optlearn/random.hpp"

#include "json.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace optlearn {

std::vector<State> Trajectory::states() const {
  std::vector<State> out;
  out.reserve(steps.size() + 1);
  for (const auto& st : steps) out.push_back(st.state);
  out.push_back(final_state);
  return out;
}

bool dynamics_consistent(const GridWorld& gw, const Trajectory& traj) {
  if (traj.steps.empty()) return false;
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const State next = t + 1 < traj.steps.size() ? traj.steps[t + 1].state : traj.final_state;
    if (gw.step(traj.steps[t].state, traj.steps[t].action) != next) return false;
  }
  return true;
}

QTable q_learning(const GridWorld& gw, const RewardFunction& reward, const QLearningParams& params) {
  return q_learning(gw, reward, params, QTable(gw.num_states(), params.discount));
}

QTable q_learning(const GridWorld& gw, const RewardFunction& reward, const QLearningParams& params, QTable q) {
  if (!(params.alpha > 0.0 && params.alpha <= 1.0)) throw Error("alpha must lie in (0, 1]");
  if (!(params.epsilon >= 0.0 && params.epsilon <= 1.0)) throw Error("epsilon must lie in [0, 1]");
  if (!(params.discount >= 0.0 && params.discount < 1.0)) throw Error("discount must lie in [0, 1)");
  std::vector<State> starts;
  for (State s = 0; s < gw.num_states(); ++s)
    if (!reward.terminal(s)) starts.push_back(s);
  if (starts.empty()) return q;

  Rng rng(params.seed);
  for (int ep = 0; ep < params.episodes; ++ep) {
    State s = starts[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(starts.size()) - 1))];
    for (int t = 0; t < params.max_episode_steps && !reward.terminal(s); ++t) {
      Action a;
      if (uniform01(rng) < params.epsilon)
        a = action_from_index(uniform_int(rng, 0, kNumActions - 1));
      else
        a = greedy_action(q.values.row(s));
      const State next = gw.step(s, a);
      const double future = reward.terminal(next) ? 0.0 : q.values.row(next).maxCoeff();
      double& value = q(s, a);
      value += params.alpha * (reward(s, a, next) + params.discount * future - value);
      s = next;
    }
  }
  return q;
}

double greedy_agreement(const QTable& learned, const QTable& oracle, const RewardFunction& reward, double tol) {
  int total = 0;
  int same = 0;
  for (Eigen::Index s = 0; s < learned.values.rows(); ++s) {
    if (reward.terminal(static_cast<State>(s))) continue;
    ++total;
    const Action a = greedy_action(learned.values.row(s));
    if (oracle.values(s, to_index(a)) >= oracle.values.row(s).maxCoeff() - tol) ++same;
  }
  return total == 0 ? 1.0 : static_cast<double>(same) / total;
}

namespace {

bool shortest_everywhere(const GridWorld& gw, const std::vector<Action>& policy, State goal,
                         const std::vector<int>& dist) {
  for (State s = 0; s < gw.num_states(); ++s) {
    const auto path = rollout(gw, policy, s, goal, dist[static_cast<std::size_t>(s)]);
    if (path.back() != goal) return false;
  }
  return true;
}

std::vector<Action> learn_goal_policy(const GridWorld& gw, State goal, std::uint64_t seed, const DemoParams& params) {
  const auto reward = RewardFunction::goal_reward(gw, goal);
  const auto dist = bfs_distances(gw, goal);
  QLearningParams lp = params.learner;
  lp.seed = derive_seed(seed, {static_cast<std::uint64_t>(goal)});
  QTable q = q_learning(gw, reward, lp);
  auto policy = greedy_policy(q);
  for (int round = 1; round <= params.max_refinements && !shortest_everywhere(gw, policy, goal, dist); ++round) {
    lp.seed = derive_seed(seed, {static_cast<std::uint64_t>(goal), static_cast<std::uint64_t>(round)});
    q = q_learning(gw, reward, lp, std::move(q));
    policy = greedy_policy(q);
  }
  if (!shortest_everywhere(gw, policy, goal, dist))
    throw Error("Q-learning policy for goal " + std::to_string(goal) + " does not reach the goal optimally");
  return policy;
}

}  // namespace

std::vector<Trajectory> generate_demos(const GridWorld& gw, int n, std::uint64_t seed, const DemoParams& params) {
  if (n < 1) throw Error("demo count must be at least 1");
  if (gw.num_states() < 2) throw Error("need at least two states to draw distinct start and goal");
  std::map<State, std::vector<Action>> policies;
  Rng rng(derive_seed(seed, {0xde70ULL}));
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const State goal = uniform_int(rng, 0, gw.num_states() - 1);
    State start = uniform_int(rng, 0, gw.num_states() - 1);
    while (start == goal) start = uniform_int(rng, 0, gw.num_states() - 1);
    auto it = policies.find(goal);
    if (it == policies.end()) it = policies.emplace(goal, learn_goal_policy(gw, goal, seed, params)).first;
    const auto path = rollout(gw, it->second, start, goal, 4 * gw.num_states());
    if (path.back() != goal) throw Error("greedy policy failed to reach goal " + std::to_string(goal));
    Trajectory traj;
    traj.id = i;
    traj.goal = goal;
    traj.final_state = goal;
    for (std::size_t t = 0; t + 1 < path.size(); ++t)
      traj.steps.push_back({path[t], it->second[static_cast<std::size_t>(path[t])]});
    out.push_back(std::move(traj));
  }
  return out;
}

void write_trajectories(std::ostream& out, const std::vector<Trajectory>& trajs) {
  for (const auto& traj : trajs) {
    nlohmann::ordered_json j;
    j["id"] = traj.id;
    j["goal"] = traj.goal;
    auto steps = nlohmann::ordered_json::array();
    for (const auto& st : traj.steps) steps.push_back({st.state, to_index(st.action)});
    j["steps"] = std::move(steps);
    out << j.dump() << '\n';
  }
}

void write_trajectories(const std::string& path, const std::vector<Trajectory>& trajs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trajectories to " + path);
  write_trajectories(out, trajs);
  if (!out) throw Error("failed writing " + path);
}

std::vector<Trajectory> read_trajectories(std::istream& in, const GridWorld& gw) {
  std::vector<Trajectory> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.contains("meta")) continue;
      Trajectory traj;
      traj.id = j.at("id").get<int>();
      traj.goal = j.at("goal").get<int>();
      for (const auto& st : j.at("steps")) {
        const State s = st.at(0).get<int>();
        if (!gw.valid(s)) throw Error("state out of range");
        traj.steps.push_back({s, action_from_index(st.at(1).get<int>())});
      }
      if (traj.steps.empty()) throw Error("trajectory has no steps");
      traj.final_state = gw.step(traj.steps.back().state, traj.steps.back().action);
      out.push_back(std::move(traj));
    } catch (const std::exception& e) {
      throw Error("trajectory line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Trajectory> read_trajectories(const std::string& path, const GridWorld& gw) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trajectories file: " + path);
  return read_trajectories(in, gw);
}

}  // namespace optlearn
