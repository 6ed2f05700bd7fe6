#include "optlearn/irl.hpp"

#include "optlearn/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace optlearn {

namespace {

// log_z(h - 1, s): log of the summed exp-reward of all paths that visit h
// states starting from s (the reward of s included).
Eigen::MatrixXd log_partition(const GridWorld& gw, const Eigen::VectorXd& rewards, int max_horizon) {
  const int n = gw.num_states();
  Eigen::MatrixXd log_z(max_horizon, n);
  log_z.row(0) = rewards.transpose();
  Eigen::Vector4d terms;
  for (int h = 1; h < max_horizon; ++h) {
    for (State s = 0; s < n; ++s) {
      for (Action a : kActions) terms[to_index(a)] = log_z(h - 1, gw.step(s, a));
      log_z(h, s) = rewards[s] + log_sum_exp(terms);
    }
  }
  return log_z;
}

// Visitation counts for a set of start masses keyed by horizon. `inject(h)`
// holds the start mass of paths with h states. Paths are propagated with
// the local policy for the number of states remaining.
Eigen::VectorXd propagate(const GridWorld& gw, const Eigen::VectorXd& rewards, const Eigen::MatrixXd& log_z,
                          const std::vector<Eigen::VectorXd>& inject) {
  const int n = gw.num_states();
  const int max_h = static_cast<int>(inject.size()) - 1;
  Eigen::VectorXd visits = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
  for (int h = max_h; h >= 1; --h) {
    if (inject[static_cast<std::size_t>(h)].size() == n) mass += inject[static_cast<std::size_t>(h)];
    visits += mass;
    if (h == 1) break;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(n);
    for (State s = 0; s < n; ++s) {
      if (mass[s] == 0.0) continue;
      // log_z(h-1, s) - r(s) normalises the h-1 remaining successors.
      const double norm = log_z(h - 1, s) - rewards[s];
      for (Action a : kActions) {
        const State to = gw.step(s, a);
        next[to] += mass[s] * std::exp(log_z(h - 2, to) - norm);
      }
    }
    mass = std::move(next);
  }
  return visits;
}

void check_inputs(const GridWorld& gw, const std::vector<Trajectory>& trajs, const FeatureMap& fmap) {
  if (trajs.empty()) throw Error("IRL needs at least one trajectory");
  if (fmap.num_states() != gw.num_states()) throw Error("feature map does not cover every state");
}

int max_horizon(const std::vector<Trajectory>& trajs) {
  int h = 1;
  for (const auto& t : trajs) h = std::max(h, t.length() + 1);
  return h;
}

}  // namespace

Eigen::VectorXd empirical_feature_expectations(const std::vector<Trajectory>& trajs, const FeatureMap& fmap) {
  if (trajs.empty()) throw Error("empirical feature expectations need at least one trajectory");
  Eigen::VectorXd total = Eigen::VectorXd::Zero(fmap.dim());
  for (const auto& traj : trajs)
    for (State s : traj.states()) total += fmap.row(s).transpose();
  return total / static_cast<double>(trajs.size());
}

Eigen::VectorXd expected_state_visitations(const GridWorld& gw, const Eigen::VectorXd& theta, const FeatureMap& fmap,
                                           int horizon, const Eigen::VectorXd& start_dist) {
  if (horizon < 1) throw Error("horizon must be at least 1");
  if (start_dist.size() != gw.num_states()) throw Error("start distribution has the wrong size");
  const Eigen::VectorXd rewards = fmap.features * theta;
  const auto log_z = log_partition(gw, rewards, horizon);
  std::vector<Eigen::VectorXd> inject(static_cast<std::size_t>(horizon) + 1);
  inject[static_cast<std::size_t>(horizon)] = start_dist;
  return propagate(gw, rewards, log_z, inject);
}

Eigen::VectorXd expected_feature_expectations(const GridWorld& gw, const std::vector<Trajectory>& trajs,
                                              const FeatureMap& fmap, const Eigen::VectorXd& theta) {
  check_inputs(gw, trajs, fmap);
  const int max_h = max_horizon(trajs);
  const Eigen::VectorXd rewards = fmap.features * theta;
  const auto log_z = log_partition(gw, rewards, max_h);
  std::vector<Eigen::VectorXd> inject(static_cast<std::size_t>(max_h) + 1);
  const double w = 1.0 / static_cast<double>(trajs.size());
  for (const auto& traj : trajs) {
    auto& slot = inject[static_cast<std::size_t>(traj.length() + 1)];
    if (slot.size() == 0) slot = Eigen::VectorXd::Zero(gw.num_states());
    slot[traj.steps.front().state] += w;
  }
  return fmap.features.transpose() * propagate(gw, rewards, log_z, inject);
}

double irl_log_likelihood(const GridWorld& gw, const std::vector<Trajectory>& trajs, const FeatureMap& fmap,
                          const Eigen::VectorXd& theta) {
  check_inputs(gw, trajs, fmap);
  const Eigen::VectorXd rewards = fmap.features * theta;
  const auto log_z = log_partition(gw, rewards, max_horizon(trajs));
  double total = 0.0;
  for (const auto& traj : trajs) {
    double path_reward = 0.0;
    for (State s : traj.states()) path_reward += rewards[s];
    total += path_reward - log_z(traj.length(), traj.steps.front().state);
  }
  return total / static_cast<double>(trajs.size());
}

IrlResult maxent_irl(const GridWorld& gw, const std::vector<Trajectory>& trajs, const FeatureMap& fmap,
                     const IrlParams& params) {
  check_inputs(gw, trajs, fmap);
  const Eigen::VectorXd empirical = empirical_feature_expectations(trajs, fmap);
  IrlResult result;
  result.weights.theta = Eigen::VectorXd::Zero(fmap.dim());
  double previous_norm = std::numeric_limits<double>::infinity();
  int growth = 0;
  double step = params.learning_rate;
  for (int it = 0; it < params.iterations; ++it) {
    const Eigen::VectorXd grad =
        empirical - expected_feature_expectations(gw, trajs, fmap, result.weights.theta);
    result.gradient_inf = grad.lpNorm<Eigen::Infinity>();
    result.iterations = it;
    if (result.gradient_inf <= params.tolerance) {
      result.converged = true;
      return result;
    }
    const double norm = grad.norm();
    growth = norm > previous_norm ? growth + 1 : 0;
    if (!std::isfinite(norm) || growth >= params.divergence_window) {
      std::ostringstream msg;
      msg << "maximum-entropy IRL diverged at iteration " << it << " (gradient norm " << norm
          << ", learning rate " << params.learning_rate << ", step " << step << ")";
      throw IrlDivergence(msg.str());
    }
    // A growing gradient norm means the step overshoots the curvature.
    if (growth > 0) step *= 0.5;
    previous_norm = norm;
    result.weights.theta += step * grad;
  }
  result.iterations = params.iterations;
  result.gradient_inf =
      (empirical - expected_feature_expectations(gw, trajs, fmap, result.weights.theta)).lpNorm<Eigen::Infinity>();
  result.converged = result.gradient_inf <= params.tolerance;
  return result;
}

}  // namespace optlearn
