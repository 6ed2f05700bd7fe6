#pragma once

#include "optlearn/demo.hpp"
#include "optlearn/gridworld.hpp"
#include "optlearn/irl.hpp"
#include "optlearn/random.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace optlearn {

struct SegmenterConfig {
  double bp_mass = 2.0;        // beta-process mass
  double dir_gamma = 1.0;      // Dirichlet concentration on transitions
  double sticky_kappa = 25.0;  // extra self-transition mass
  double tau = 5.0;            // Boltzmann temperature of the action likelihood
  int sweeps = 500;
  double time_budget_seconds = 0.0;  // <= 0 disables the wall-clock limit
  int refit_every = 5;
  int moves_per_sweep = 4;  // birth/death and shared-death proposals per sweep
  int split_merge_moves = 1;  // split and merge proposals per sweep
  bool consolidate = true;    // greedy merges on the best state after sampling
  int birth_min_window = 5;
  int birth_max_window = 20;
  double skill_discount = 0.9;  // value iteration on learned rewards
  IrlParams irl;
  std::uint64_t seed = 0;
};

/// A skill: IRL reward weights and the Boltzmann policy of their optimal values.
struct Skill {
  int id = 0;
  RewardWeights weights;
  QTable q;
  Eigen::MatrixXd log_policy;  // log Boltzmann(tau, q), states x actions
};

/// Builds a skill from reward weights: value iteration, then Boltzmann policy.
Skill make_skill(const GridWorld& gw, int id, RewardWeights weights, const SegmenterConfig& config);

/// Sampler state. `features(i, k)` says whether skills[k] is available to
/// trajectory i; `z[i][t]` holds skill ids; `trans[i]` is a row-stochastic
/// matrix over the active skills of trajectory i, in skill order.
struct SegmentationState {
  std::vector<Skill> skills;
  Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> features;
  std::vector<std::vector<int>> z;
  std::vector<Eigen::MatrixXd> trans;
  double joint_log_likelihood = 0.0;
  int next_skill_id = 0;
  /// (trajectory, offset, length) of the segments each skill was last fit on.
  std::map<int, std::vector<std::array<int, 3>>> fit_signatures;

  int num_trajectories() const { return static_cast<int>(z.size()); }
  int num_skills() const { return static_cast<int>(skills.size()); }
  /// Position of a skill id in `skills`, or -1.
  int index_of(int skill_id) const;
  /// Positions of the skills available to trajectory i.
  std::vector<int> active(int traj) const;
  /// Time steps assigned to each skill (by position) across all trajectories.
  std::vector<int> usage() const;
};

/// Empty when every invariant holds, otherwise a description of the first violation.
std::string check_invariants(const SegmentationState& state);

/// A maximal run of constant skill label within one trajectory.
struct Segment {
  int skill_id = 0;
  int trajectory_id = 0;
  int offset = 0;  // index of the first step in the trajectory
  State start_state = 0;
  State end_state = 0;  // state reached after the last action
  std::vector<Step> steps;

  /// The segment as a standalone trajectory.
  Trajectory as_trajectory() const;
};

// Sampler building blocks ----------------------------------------------------

/// Sum over steps of log Boltzmann(tau, q)(s_t, a_t).
double emission_log_likelihood(const Trajectory& traj, const QTable& q, double tau);

/// Per-step log-likelihood under each listed skill, steps x skills.
Eigen::MatrixXd emission_matrix(const Trajectory& traj, const std::vector<const Skill*>& skills);

/// log p(actions) with modes marginalised by the forward algorithm; the
/// first mode is uniform over the columns of `emissions`.
double forward_log_likelihood(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans);

/// Forward-filter backward-sample; returns column indices of `emissions`.
std::vector<int> sample_mode_sequence(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans, Rng& rng);

/// Transition counts among `active` skills (ids); steps whose label is not
/// active are skipped.
Eigen::MatrixXd transition_counts(const std::vector<int>& z, const std::vector<int>& active_ids);

/// Rows drawn from Dirichlet(counts + gamma + kappa * [self]).
Eigen::MatrixXd sample_transitions(const std::vector<int>& z, const std::vector<int>& active_ids, double dir_gamma,
                                   double sticky_kappa, Rng& rng);
/// Posterior mean of the same Dirichlet rows.
Eigen::MatrixXd posterior_mean_transitions(const std::vector<int>& z, const std::vector<int>& active_ids,
                                           double dir_gamma, double sticky_kappa);

/// log p(z | active skills) with the transition rows integrated out.
double log_mode_prior(const std::vector<int>& z, const std::vector<int>& active_ids, double dir_gamma,
                      double sticky_kappa);

/// Log-probability of the binary feature matrix under the Indian buffet
/// process with mass `bp_mass`, up to column ordering.
double log_ibp_prior(const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& features, double bp_mass);

/// Emission + mode + feature terms of the full state.
double joint_log_likelihood(const SegmentationState& state, const std::vector<Trajectory>& demos,
                            const SegmenterConfig& config);

/// Maximal constant-label runs, grouped by skill id.
std::map<int, std::vector<Segment>> extract_segments(const SegmentationState& state,
                                                     const std::vector<Trajectory>& demos);

class SkillRefitError : public Error {
 public:
  SkillRefitError(int skill_id, const std::string& what)
      : Error("skill " + std::to_string(skill_id) + ": " + what), skill_id(skill_id) {}
  int skill_id;
};

/// Runs maximum-entropy IRL on each skill's segments and rebuilds its values
/// and policy. Skills whose segment set is unchanged since the last call
/// keep their parameters.
void refit_skill_rewards(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                         const SegmenterConfig& config);

/// Resamples trajectory i: shared-feature flips, then transitions, modes and
/// transitions again.
void resample_trajectory(SegmentationState& state, int traj, const GridWorld& gw,
                         const std::vector<Trajectory>& demos, const SegmenterConfig& config, Rng& rng);

/// One reversible-jump proposal on a random trajectory: birth of a skill fit
/// to a random window, or death of a skill unique to that trajectory.
/// Returns true when the proposal was accepted.
bool birth_death_move(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                      const SegmenterConfig& config, Rng& rng);

/// Proposes deleting one skill from every trajectory at once; accepted on the
/// marginal likelihood and feature-prior ratio. Affected modes are resampled.
bool shared_death_move(SegmentationState& state, const std::vector<Trajectory>& demos, const SegmenterConfig& config,
                       Rng& rng);

/// Proposes replacing two skills by one fit on the union of their segments,
/// in every trajectory that uses either; accepted on the marginal likelihood
/// and feature-prior ratio.
bool merge_move(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                const SegmenterConfig& config, Rng& rng);

/// Greedily merges each skill with its best-scoring partner while the merge
/// raises the marginal likelihood. Returns the number of merges made.
int consolidate(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                const SegmenterConfig& config, Rng& rng);

/// Proposes splitting one skill in two: two random anchor segments seed the
/// new skills, every other segment goes to the one that explains it better,
/// and both are refit. Accepted like merge_move.
bool split_move(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                const SegmenterConfig& config, Rng& rng);

/// Drops skills with no assigned time steps.
void prune_orphans(SegmentationState& state);

/// One global skill fit on every demonstration.
SegmentationState initial_state(const GridWorld& gw, const std::vector<Trajectory>& demos,
                                const SegmenterConfig& config);

struct SamplerTrace {
  std::vector<double> joint_log_likelihood;  // per sweep
  std::vector<int> num_skills;               // per sweep
  double best_log_likelihood = 0.0;
  int best_sweep = 0;
  int sweeps_run = 0;
};

/// Runs the sampler and returns the highest joint log-likelihood state seen.
SegmentationState run_sampler(const GridWorld& gw, const std::vector<Trajectory>& demos,
                              const SegmenterConfig& config, SamplerTrace* trace = nullptr);

}  // namespace optlearn
