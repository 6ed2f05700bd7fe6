#pragma once

#include "optlearn/demo.hpp"
#include "optlearn/gridworld.hpp"

#include <Eigen/Dense>

#include <vector>

namespace optlearn {

/// Per-state feature vectors, one row per state.
struct FeatureMap {
  Eigen::MatrixXd features;

  int dim() const { return static_cast<int>(features.cols()); }
  int num_states() const { return static_cast<int>(features.rows()); }
  auto row(State s) const { return features.row(s); }

  static FeatureMap one_hot(int num_states) {
    return FeatureMap{Eigen::MatrixXd::Identity(num_states, num_states)};
  }
};

struct RewardWeights {
  Eigen::VectorXd theta;

  /// Reward of each state, `features * theta`.
  Eigen::VectorXd state_rewards(const FeatureMap& fmap) const { return fmap.features * theta; }
};

/// Mean over trajectories of the summed features of every visited state
/// (step states and the final state).
Eigen::VectorXd empirical_feature_expectations(const std::vector<Trajectory>& trajs, const FeatureMap& fmap);

/// Expected visitation counts of paths that visit exactly `horizon` states,
/// drawn from P(path) proportional to exp(sum of state rewards) and started
/// from `start_dist`.
Eigen::VectorXd expected_state_visitations(const GridWorld& gw, const Eigen::VectorXd& theta, const FeatureMap& fmap,
                                           int horizon, const Eigen::VectorXd& start_dist);

/// Expected feature counts under the maximum-entropy model, each
/// demonstration contributing paths of its own length from its own start.
Eigen::VectorXd expected_feature_expectations(const GridWorld& gw, const std::vector<Trajectory>& trajs,
                                              const FeatureMap& fmap, const Eigen::VectorXd& theta);

/// Mean log-probability of the demonstrations under the maximum-entropy
/// path distribution. Its gradient is empirical minus expected features.
double irl_log_likelihood(const GridWorld& gw, const std::vector<Trajectory>& trajs, const FeatureMap& fmap,
                          const Eigen::VectorXd& theta);

struct IrlParams {
  double learning_rate = 0.1;
  int iterations = 500;
  double tolerance = 1e-2;  // on the L-infinity norm of the gradient
  int divergence_window = 10;
};

struct IrlResult {
  RewardWeights weights;
  int iterations = 0;
  double gradient_inf = 0.0;
  bool converged = false;
};

class IrlDivergence : public Error {
 public:
  using Error::Error;
};

/// Gradient ascent on the maximum-entropy log-likelihood from theta = 0.
/// Throws IrlDivergence when the gradient norm grows for `divergence_window`
/// consecutive iterations. The step is halved each time the norm grows.
IrlResult maxent_irl(const GridWorld& gw, const std::vector<Trajectory>& trajs, const FeatureMap& fmap,
                     const IrlParams& params = {});

}  // namespace optlearn
