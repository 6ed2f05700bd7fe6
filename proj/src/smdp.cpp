#include "optlearn/smdp.hpp"

#include "optlearn/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace optlearn {

OptionOutcome execute_option(const GridWorld& gw, const RewardFunction& reward, const Option& option, State s,
                             double discount, int max_steps) {
  if (!option.in_domain(s))
    throw Error("option " + std::to_string(option.id) + " started outside its domain at " + std::to_string(s));
  OptionOutcome out;
  double weight = 1.0;
  State cur = s;
  while (true) {
    const Action a = option.action(cur);
    const State next = gw.step(cur, a);
    out.reward += weight * reward(cur, a, next);
    weight *= discount;
    ++out.duration;
    cur = next;
    if (reward.terminal(cur) || option.terminates(cur) || !option.in_domain(cur)) break;
    if (out.duration >= max_steps)
      throw Error("option " + std::to_string(option.id) + " ran " + std::to_string(max_steps) +
                  " steps without terminating");
  }
  out.final_state = cur;
  return out;
}

SmdpRun smdp_q_learning(const GridWorld& gw, const RewardFunction& reward, const std::vector<Option>& options,
                        const SmdpParams& params, std::uint64_t seed) {
  if (!(params.alpha > 0.0 && params.alpha <= 1.0)) throw Error("alpha must lie in (0, 1]");
  if (!(params.epsilon >= 0.0 && params.epsilon <= 1.0)) throw Error("epsilon must lie in [0, 1]");
  if (!(params.discount >= 0.0 && params.discount < 1.0)) throw Error("discount must lie in [0, 1)");
  const int n = gw.num_states();
  const int choices = kNumActions + static_cast<int>(options.size());
  SmdpRun run;
  run.q = Eigen::MatrixXd::Zero(n, choices);

  std::vector<std::vector<int>> eligible(static_cast<std::size_t>(n));
  for (State s = 0; s < n; ++s) {
    for (int a = 0; a < kNumActions; ++a) eligible[static_cast<std::size_t>(s)].push_back(a);
    for (std::size_t o = 0; o < options.size(); ++o)
      if (options[o].can_initiate(s)) eligible[static_cast<std::size_t>(s)].push_back(kNumActions + static_cast<int>(o));
  }
  auto best_value = [&](State s) {
    double best = -std::numeric_limits<double>::infinity();
    for (int c : eligible[static_cast<std::size_t>(s)]) best = std::max(best, run.q(s, c));
    return best;
  };
  auto greedy = [&](State s) {
    const auto& el = eligible[static_cast<std::size_t>(s)];
    int best = el.front();
    for (int c : el)
      if (run.q(s, c) > run.q(s, best)) best = c;
    return best;
  };

  std::vector<State> starts;
  for (State s = 0; s < n; ++s)
    if (!reward.terminal(s)) starts.push_back(s);
  if (starts.empty()) return run;

  Rng rng(seed);
  for (int ep = 0; ep < params.episodes; ++ep) {
    State s = starts[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(starts.size()) - 1))];
    int steps = 0;
    while (steps < params.max_episode_steps && !reward.terminal(s)) {
      const auto& el = eligible[static_cast<std::size_t>(s)];
      int c;
      if (uniform01(rng) < params.epsilon)
        c = el[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(el.size()) - 1))];
      else
        c = greedy(s);
      State next;
      double r;
      double weight;
      if (c < kNumActions) {
        const Action a = action_from_index(c);
        next = gw.step(s, a);
        r = reward(s, a, next);
        weight = params.discount;
        ++steps;
      } else {
        const auto out = execute_option(gw, reward, options[static_cast<std::size_t>(c - kNumActions)], s, params.discount);
        next = out.final_state;
        r = out.reward;
        weight = std::pow(params.discount, out.duration);
        steps += out.duration;
      }
      const double future = reward.terminal(next) ? 0.0 : best_value(next);
      double& value = run.q(s, c);
      value += params.alpha * (r + weight * future - value);
      s = next;
    }
    run.steps.push_back(steps);
  }
  return run;
}

LearningCurve summarize(const std::vector<std::vector<int>>& runs) {
  LearningCurve curve;
  curve.runs = static_cast<int>(runs.size());
  if (runs.empty()) return curve;
  const auto episodes = static_cast<Eigen::Index>(runs.front().size());
  Eigen::MatrixXd data(static_cast<Eigen::Index>(runs.size()), episodes);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (static_cast<Eigen::Index>(runs[r].size()) != episodes) throw Error("runs differ in episode count");
    for (Eigen::Index e = 0; e < episodes; ++e) data(static_cast<Eigen::Index>(r), e) = runs[r][static_cast<std::size_t>(e)];
  }
  curve.mean = data.colwise().mean().transpose();
  curve.stderr_ = Eigen::VectorXd::Zero(episodes);
  if (runs.size() > 1) {
    const double m = static_cast<double>(runs.size());
    const Eigen::MatrixXd centred = data.rowwise() - curve.mean.transpose();
    curve.stderr_ = (centred.array().square().colwise().sum() / (m - 1.0)).sqrt().transpose() / std::sqrt(m);
  }
  return curve;
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::None: return "none";
    case Condition::Learned: return "learned";
    case Condition::Handcrafted: return "handcrafted";
  }
  return "unknown";
}

std::uint64_t run_seed(std::uint64_t seed, const std::string& goal_label, Condition c, int run) {
  std::uint64_t label = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : goal_label) label = (label ^ ch) * 0x100000001b3ULL;
  return derive_seed(seed, {label, static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(run)});
}

std::vector<CurveGroup> compare(const GridWorld& gw, const std::vector<Option>& learned,
                                const std::vector<Option>& handcrafted, const std::vector<GoalSpec>& goals, int runs,
                                const SmdpParams& params, std::uint64_t seed) {
  if (runs < 1) throw Error("need at least one run per condition");
  std::vector<CurveGroup> out;
  for (const auto& goal : goals) {
    const auto reward = RewardFunction::goal_reward(gw, goal.state);
    for (Condition c : {Condition::None, Condition::Learned, Condition::Handcrafted}) {
      static const std::vector<Option> kNoOptions;
      const auto& options = c == Condition::None ? kNoOptions : c == Condition::Learned ? learned : handcrafted;
      std::vector<std::vector<int>> steps;
      for (int r = 0; r < runs; ++r)
        steps.push_back(smdp_q_learning(gw, reward, options, params, run_seed(seed, goal.label, c, r)).steps);
      out.push_back({goal.label, goal.state, c, summarize(steps)});
    }
  }
  return out;
}

void write_curves_csv(std::ostream& out, const std::vector<CurveGroup>& groups) {
  out << "goal,condition,episode,mean_steps,stderr,runs\n";
  for (const auto& g : groups) {
    for (Eigen::Index e = 0; e < g.curve.mean.size(); ++e) {
      std::ostringstream line;
      line << std::setprecision(10) << g.goal_label << ',' << to_string(g.condition) << ',' << e + 1 << ','
           << g.curve.mean[e] << ',' << g.curve.stderr_[e] << ',' << g.curve.runs << '\n';
      out << line.str();
    }
  }
}

double mean_shortest_path(const GridWorld& gw, State goal) {
  const auto dist = bfs_distances(gw, goal);
  double total = 0.0;
  int count = 0;
  for (State s = 0; s < gw.num_states(); ++s) {
    if (s == goal || dist[static_cast<std::size_t>(s)] < 0) continue;
    total += dist[static_cast<std::size_t>(s)];
    ++count;
  }
  return count ? total / count : 0.0;
}

}  // namespace optlearn
