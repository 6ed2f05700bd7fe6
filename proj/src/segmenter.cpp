#include "optlearn/segmenter.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace optlearn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Trajectory window(const Trajectory& traj, int offset, int length) {
  Trajectory out;
  out.id = traj.id;
  out.goal = traj.goal;
  out.steps.assign(traj.steps.begin() + offset, traj.steps.begin() + offset + length);
  const auto end = static_cast<std::size_t>(offset + length);
  out.final_state = end < traj.steps.size() ? traj.steps[end].state : traj.final_state;
  return out;
}

std::vector<int> ids_of(const SegmentationState& state, const std::vector<int>& positions) {
  std::vector<int> ids;
  ids.reserve(positions.size());
  for (int k : positions) ids.push_back(state.skills[static_cast<std::size_t>(k)].id);
  return ids;
}

std::vector<const Skill*> skills_at(const SegmentationState& state, const std::vector<int>& positions) {
  std::vector<const Skill*> out;
  out.reserve(positions.size());
  for (int k : positions) out.push_back(&state.skills[static_cast<std::size_t>(k)]);
  return out;
}

// Marginal log-likelihood of trajectory i's actions given a candidate skill
// set, with transitions fixed at their posterior mean under the current modes.
double marginal_log_likelihood(const std::vector<const Skill*>& skills, const std::vector<int>& z,
                               const Trajectory& traj, const SegmenterConfig& config) {
  std::vector<int> ids;
  ids.reserve(skills.size());
  for (const auto* s : skills) ids.push_back(s->id);
  const auto trans = posterior_mean_transitions(z, ids, config.dir_gamma, config.sticky_kappa);
  return forward_log_likelihood(emission_matrix(traj, skills), trans);
}

void resample_modes(SegmentationState& state, int i, const Trajectory& traj, const SegmenterConfig& config,
                    Rng& rng) {
  const auto active = state.active(i);
  const auto ids = ids_of(state, active);
  auto& z = state.z[static_cast<std::size_t>(i)];
  Eigen::MatrixXd trans = sample_transitions(z, ids, config.dir_gamma, config.sticky_kappa, rng);
  const auto picks = sample_mode_sequence(emission_matrix(traj, skills_at(state, active)), trans, rng);
  for (std::size_t t = 0; t < picks.size(); ++t) z[t] = ids[static_cast<std::size_t>(picks[t])];
  state.trans[static_cast<std::size_t>(i)] = sample_transitions(z, ids, config.dir_gamma, config.sticky_kappa, rng);
}

double own_log_likelihood(const Skill& skill, const std::vector<Trajectory>& data) {
  double total = 0.0;
  for (const auto& traj : data)
    for (const auto& st : traj.steps) total += skill.log_policy(st.state, to_index(st.action));
  return total;
}

void remove_skill(SegmentationState& state, int position) {
  const auto k = static_cast<Eigen::Index>(position);
  for (int i = 0; i < state.num_trajectories(); ++i) {
    if (!state.features(i, k)) continue;
    // Drop the row and column of the removed skill and renormalise.
    const auto active = state.active(i);
    const auto local = static_cast<Eigen::Index>(std::find(active.begin(), active.end(), position) - active.begin());
    auto& trans = state.trans[static_cast<std::size_t>(i)];
    const Eigen::Index n = trans.rows();
    Eigen::MatrixXd reduced(n - 1, n - 1);
    for (Eigen::Index r = 0, rr = 0; r < n; ++r) {
      if (r == local) continue;
      for (Eigen::Index c = 0, cc = 0; c < n; ++c) {
        if (c == local) continue;
        reduced(rr, cc++) = trans(r, c);
      }
      ++rr;
    }
    for (Eigen::Index r = 0; r < reduced.rows(); ++r) {
      const double total = reduced.row(r).sum();
      if (total > 0.0)
        reduced.row(r) /= total;
      else
        reduced.row(r).setConstant(1.0 / static_cast<double>(reduced.cols()));
    }
    trans = std::move(reduced);
  }
  const Eigen::Index cols = state.features.cols();
  if (k + 1 < cols) state.features.middleCols(k, cols - k - 1) = state.features.rightCols(cols - k - 1).eval();
  state.features.conservativeResize(Eigen::NoChange, cols - 1);
  state.skills.erase(state.skills.begin() + position);
}

}  // namespace

// State ----------------------------------------------------------------------

int SegmentationState::index_of(int skill_id) const {
  for (std::size_t k = 0; k < skills.size(); ++k)
    if (skills[k].id == skill_id) return static_cast<int>(k);
  return -1;
}

std::vector<int> SegmentationState::active(int traj) const {
  std::vector<int> out;
  for (Eigen::Index k = 0; k < features.cols(); ++k)
    if (features(traj, k)) out.push_back(static_cast<int>(k));
  return out;
}

std::vector<int> SegmentationState::usage() const {
  std::vector<int> counts(skills.size(), 0);
  for (const auto& zi : z)
    for (int id : zi) {
      const int k = index_of(id);
      if (k >= 0) ++counts[static_cast<std::size_t>(k)];
    }
  return counts;
}

std::string check_invariants(const SegmentationState& state) {
  std::ostringstream err;
  if (state.features.cols() != state.num_skills()) return "feature matrix column count differs from skill count";
  if (state.features.rows() != state.num_trajectories()) return "feature matrix row count differs from trajectory count";
  if (state.trans.size() != state.z.size()) return "transition list size differs from trajectory count";
  for (int i = 0; i < state.num_trajectories(); ++i) {
    const auto active = state.active(i);
    if (active.empty()) {
      err << "trajectory " << i << " has no active skill";
      return err.str();
    }
    const auto ids = ids_of(state, active);
    for (int id : state.z[static_cast<std::size_t>(i)]) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
        err << "trajectory " << i << " uses inactive skill " << id;
        return err.str();
      }
    }
    const auto& trans = state.trans[static_cast<std::size_t>(i)];
    if (trans.rows() != static_cast<Eigen::Index>(active.size()) || trans.cols() != trans.rows()) {
      err << "trajectory " << i << " transition matrix has the wrong shape";
      return err.str();
    }
    for (Eigen::Index r = 0; r < trans.rows(); ++r) {
      if (std::abs(trans.row(r).sum() - 1.0) > 1e-12 || (trans.row(r).array() < 0.0).any()) {
        err << "trajectory " << i << " transition row " << r << " is not a distribution";
        return err.str();
      }
    }
  }
  const auto counts = state.usage();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] == 0) {
      err << "skill " << state.skills[k].id << " has no assigned steps";
      return err.str();
    }
  }
  return {};
}

Trajectory Segment::as_trajectory() const {
  Trajectory t;
  t.id = trajectory_id;
  t.goal = end_state;
  t.steps = steps;
  t.final_state = end_state;
  return t;
}

// Building blocks -------------------------------------------------------------

Skill make_skill(const GridWorld& gw, int id, RewardWeights weights, const SegmenterConfig& config) {
  Skill skill;
  skill.id = id;
  skill.q = value_iteration(gw, RewardFunction::state_reward(weights.theta), config.skill_discount, 1e-6);
  skill.log_policy = log_boltzmann(skill.q.values, config.tau);
  skill.weights = std::move(weights);
  return skill;
}

double emission_log_likelihood(const Trajectory& traj, const QTable& q, double tau) {
  const Eigen::MatrixXd log_policy = log_boltzmann(q.values, tau);
  double total = 0.0;
  for (const auto& st : traj.steps) total += log_policy(st.state, to_index(st.action));
  return total;
}

Eigen::MatrixXd emission_matrix(const Trajectory& traj, const std::vector<const Skill*>& skills) {
  Eigen::MatrixXd out(traj.length(), static_cast<Eigen::Index>(skills.size()));
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    const auto& st = traj.steps[static_cast<std::size_t>(t)];
    for (Eigen::Index k = 0; k < out.cols(); ++k)
      out(t, k) = skills[static_cast<std::size_t>(k)]->log_policy(st.state, to_index(st.action));
  }
  return out;
}

double forward_log_likelihood(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans) {
  const Eigen::Index steps = emissions.rows();
  const Eigen::Index k = emissions.cols();
  if (steps == 0) return 0.0;
  const Eigen::MatrixXd log_trans = trans.array().log().matrix();
  Eigen::VectorXd alpha = emissions.row(0).transpose().array() - std::log(static_cast<double>(k));
  Eigen::VectorXd next(k);
  for (Eigen::Index t = 1; t < steps; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) next[j] = emissions(t, j) + log_sum_exp(alpha + log_trans.col(j));
    alpha.swap(next);
  }
  return log_sum_exp(alpha);
}

std::vector<int> sample_mode_sequence(const Eigen::MatrixXd& emissions, const Eigen::MatrixXd& trans, Rng& rng) {
  const Eigen::Index steps = emissions.rows();
  const Eigen::Index k = emissions.cols();
  std::vector<int> z(static_cast<std::size_t>(steps), 0);
  if (steps == 0 || k == 0) return z;
  if (k == 1) return z;
  const Eigen::MatrixXd log_trans = trans.array().log().matrix();
  Eigen::MatrixXd alpha(steps, k);
  alpha.row(0) = emissions.row(0).array() - std::log(static_cast<double>(k));
  for (Eigen::Index t = 1; t < steps; ++t)
    for (Eigen::Index j = 0; j < k; ++j)
      alpha(t, j) = emissions(t, j) + log_sum_exp(alpha.row(t - 1).transpose() + log_trans.col(j));
  z.back() = sample_log_weights(rng, alpha.row(steps - 1).transpose());
  for (Eigen::Index t = steps - 2; t >= 0; --t) {
    const auto after = static_cast<Eigen::Index>(z[static_cast<std::size_t>(t + 1)]);
    z[static_cast<std::size_t>(t)] = sample_log_weights(rng, alpha.row(t).transpose() + log_trans.col(after));
  }
  return z;
}

Eigen::MatrixXd transition_counts(const std::vector<int>& z, const std::vector<int>& active_ids) {
  const auto k = static_cast<Eigen::Index>(active_ids.size());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(k, k);
  auto pos = [&](int id) -> Eigen::Index {
    const auto it = std::find(active_ids.begin(), active_ids.end(), id);
    return it == active_ids.end() ? -1 : static_cast<Eigen::Index>(it - active_ids.begin());
  };
  for (std::size_t t = 1; t < z.size(); ++t) {
    const auto from = pos(z[t - 1]);
    const auto to = pos(z[t]);
    if (from >= 0 && to >= 0) counts(from, to) += 1.0;
  }
  return counts;
}

namespace {

Eigen::MatrixXd dirichlet_parameters(const std::vector<int>& z, const std::vector<int>& active_ids, double dir_gamma,
                                     double sticky_kappa) {
  Eigen::MatrixXd alpha = transition_counts(z, active_ids).array() + dir_gamma;
  alpha.diagonal().array() += sticky_kappa;
  return alpha;
}

}  // namespace

Eigen::MatrixXd sample_transitions(const std::vector<int>& z, const std::vector<int>& active_ids, double dir_gamma,
                                   double sticky_kappa, Rng& rng) {
  const Eigen::MatrixXd alpha = dirichlet_parameters(z, active_ids, dir_gamma, sticky_kappa);
  Eigen::MatrixXd out(alpha.rows(), alpha.cols());
  for (Eigen::Index r = 0; r < alpha.rows(); ++r) out.row(r) = sample_dirichlet(rng, alpha.row(r).transpose()).transpose();
  return out;
}

Eigen::MatrixXd posterior_mean_transitions(const std::vector<int>& z, const std::vector<int>& active_ids,
                                           double dir_gamma, double sticky_kappa) {
  Eigen::MatrixXd alpha = dirichlet_parameters(z, active_ids, dir_gamma, sticky_kappa);
  for (Eigen::Index r = 0; r < alpha.rows(); ++r) alpha.row(r) /= alpha.row(r).sum();
  return alpha;
}

double log_mode_prior(const std::vector<int>& z, const std::vector<int>& active_ids, double dir_gamma,
                      double sticky_kappa) {
  if (z.empty()) return 0.0;
  for (int id : z)
    if (std::find(active_ids.begin(), active_ids.end(), id) == active_ids.end()) return kNegInf;
  const Eigen::MatrixXd counts = transition_counts(z, active_ids);
  const auto k = counts.rows();
  double total = -std::log(static_cast<double>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const double row_prior = static_cast<double>(k) * dir_gamma + sticky_kappa;
    total += std::lgamma(row_prior) - std::lgamma(row_prior + counts.row(j).sum());
    for (Eigen::Index c = 0; c < k; ++c) {
      const double a = dir_gamma + (c == j ? sticky_kappa : 0.0);
      total += std::lgamma(a + counts(j, c)) - std::lgamma(a);
    }
  }
  return total;
}

double log_ibp_prior(const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>& features, double bp_mass) {
  const auto rows = static_cast<double>(features.rows());
  double harmonic = 0.0;
  for (Eigen::Index j = 1; j <= features.rows(); ++j) harmonic += 1.0 / static_cast<double>(j);
  double total = -bp_mass * harmonic;
  std::map<std::vector<std::uint8_t>, int> histories;
  for (Eigen::Index k = 0; k < features.cols(); ++k) {
    const double m = features.col(k).cast<double>().sum();
    if (m == 0.0) continue;
    total += std::log(bp_mass) + std::lgamma(rows - m + 1.0) + std::lgamma(m) - std::lgamma(rows + 1.0);
    std::vector<std::uint8_t> key(features.col(k).data(), features.col(k).data() + features.rows());
    ++histories[key];
  }
  for (const auto& [key, count] : histories) total -= std::lgamma(count + 1.0);
  return total;
}

double joint_log_likelihood(const SegmentationState& state, const std::vector<Trajectory>& demos,
                            const SegmenterConfig& config) {
  double total = log_ibp_prior(state.features, config.bp_mass);
  for (int i = 0; i < state.num_trajectories(); ++i) {
    const auto& traj = demos[static_cast<std::size_t>(i)];
    const auto& z = state.z[static_cast<std::size_t>(i)];
    total += log_mode_prior(z, ids_of(state, state.active(i)), config.dir_gamma, config.sticky_kappa);
    for (std::size_t t = 0; t < z.size(); ++t) {
      const int k = state.index_of(z[t]);
      if (k < 0) return kNegInf;
      total += state.skills[static_cast<std::size_t>(k)].log_policy(traj.steps[t].state, to_index(traj.steps[t].action));
    }
  }
  return total;
}

std::map<int, std::vector<Segment>> extract_segments(const SegmentationState& state,
                                                     const std::vector<Trajectory>& demos) {
  std::map<int, std::vector<Segment>> out;
  for (int i = 0; i < state.num_trajectories(); ++i) {
    const auto& traj = demos[static_cast<std::size_t>(i)];
    const auto& z = state.z[static_cast<std::size_t>(i)];
    std::size_t begin = 0;
    while (begin < z.size()) {
      std::size_t end = begin + 1;
      while (end < z.size() && z[end] == z[begin]) ++end;
      Segment seg;
      seg.skill_id = z[begin];
      seg.trajectory_id = traj.id;
      seg.offset = static_cast<int>(begin);
      seg.steps.assign(traj.steps.begin() + static_cast<std::ptrdiff_t>(begin),
                       traj.steps.begin() + static_cast<std::ptrdiff_t>(end));
      seg.start_state = seg.steps.front().state;
      seg.end_state = end < traj.steps.size() ? traj.steps[end].state : traj.final_state;
      out[seg.skill_id].push_back(std::move(seg));
      begin = end;
    }
  }
  return out;
}

void refit_skill_rewards(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                         const SegmenterConfig& config) {
  const auto segments = extract_segments(state, demos);
  const auto fmap = FeatureMap::one_hot(gw.num_states());
  for (auto& skill : state.skills) {
    const auto it = segments.find(skill.id);
    if (it == segments.end() || it->second.empty()) throw SkillRefitError(skill.id, "no segments to fit");
    std::vector<std::array<int, 3>> signature;
    std::vector<Trajectory> data;
    for (const auto& seg : it->second) {
      signature.push_back({seg.trajectory_id, seg.offset, static_cast<int>(seg.steps.size())});
      data.push_back(seg.as_trajectory());
    }
    auto& cached = state.fit_signatures[skill.id];
    if (cached == signature) continue;
    try {
      auto fit = maxent_irl(gw, data, fmap, config.irl);
      Skill refit = make_skill(gw, skill.id, std::move(fit.weights), config);
      if (skill.log_policy.size() == 0 || own_log_likelihood(refit, data) >= own_log_likelihood(skill, data))
        skill = std::move(refit);
    } catch (const SkillRefitError&) {
      throw;
    } catch (const Error& e) {
      throw SkillRefitError(skill.id, e.what());
    }
    cached = std::move(signature);
  }
}

void resample_trajectory(SegmentationState& state, int i, const GridWorld& /*gw*/,
                         const std::vector<Trajectory>& demos, const SegmenterConfig& config, Rng& rng) {
  const auto& traj = demos[static_cast<std::size_t>(i)];
  const auto& z = state.z[static_cast<std::size_t>(i)];
  const double rows = static_cast<double>(state.num_trajectories());
  for (int k = 0; k < state.num_skills(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const bool on = state.features(i, kk) != 0;
    const double others = state.features.col(kk).cast<double>().sum() - (on ? 1.0 : 0.0);
    if (others == 0.0) continue;  // unique skills change through birth/death moves
    auto current = state.active(i);
    auto proposed = current;
    if (on) {
      proposed.erase(std::find(proposed.begin(), proposed.end(), k));
      if (proposed.empty()) continue;
    } else {
      proposed.insert(std::upper_bound(proposed.begin(), proposed.end(), k), k);
    }
    const double ll_current = marginal_log_likelihood(skills_at(state, current), z, traj, config);
    const double ll_proposed = marginal_log_likelihood(skills_at(state, proposed), z, traj, config);
    const double p_on = others / rows;
    const double log_prior = on ? std::log1p(-p_on) - std::log(p_on) : std::log(p_on) - std::log1p(-p_on);
    if (std::log(uniform01(rng)) < ll_proposed - ll_current + log_prior) {
      state.features(i, kk) = on ? 0 : 1;
    }
  }
  resample_modes(state, i, traj, config, rng);
}

bool birth_death_move(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                      const SegmenterConfig& config, Rng& rng) {
  const int i = uniform_int(rng, 0, state.num_trajectories() - 1);
  const auto& traj = demos[static_cast<std::size_t>(i)];
  const auto& z = state.z[static_cast<std::size_t>(i)];
  const auto active = state.active(i);
  std::vector<int> unique;
  for (int k : active)
    if (state.features.col(k).cast<int>().sum() == 1) unique.push_back(k);
  const double log_rate = std::log(config.bp_mass / static_cast<double>(state.num_trajectories()));

  if (uniform01(rng) < 0.5) {
    const int len = uniform_int(rng, std::min(config.birth_min_window, traj.length()),
                                std::min(config.birth_max_window, traj.length()));
    const int offset = uniform_int(rng, 0, traj.length() - len);
    Skill born;
    try {
      auto fit = maxent_irl(gw, {window(traj, offset, len)}, FeatureMap::one_hot(gw.num_states()), config.irl);
      born = make_skill(gw, state.next_skill_id, std::move(fit.weights), config);
    } catch (const Error&) {
      return false;
    }
    auto current = skills_at(state, active);
    auto proposed = current;
    proposed.push_back(&born);
    const double delta = marginal_log_likelihood(proposed, z, traj, config) -
                         marginal_log_likelihood(current, z, traj, config);
    const double ku = static_cast<double>(unique.size());
    if (!(std::log(uniform01(rng)) < delta + log_rate - 2.0 * std::log(ku + 1.0))) return false;
    state.skills.push_back(std::move(born));
    ++state.next_skill_id;
    const Eigen::Index cols = state.features.cols();
    state.features.conservativeResize(Eigen::NoChange, cols + 1);
    state.features.col(cols).setZero();
    state.features(i, cols) = 1;
    // The new skill sits last in skill order; resample_modes redraws the rows.
    auto& trans = state.trans[static_cast<std::size_t>(i)];
    trans = Eigen::MatrixXd::Constant(trans.rows() + 1, trans.cols() + 1, 1.0 / static_cast<double>(trans.cols() + 1));
    resample_modes(state, i, traj, config, rng);
    return true;
  }

  if (unique.empty()) return false;
  const int k = unique[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(unique.size()) - 1))];
  if (state.usage()[static_cast<std::size_t>(k)] == 0) {
    remove_skill(state, k);
    resample_modes(state, i, traj, config, rng);
    return true;
  }
  if (active.size() == 1) return false;
  auto remaining = active;
  remaining.erase(std::find(remaining.begin(), remaining.end(), k));
  const double delta = marginal_log_likelihood(skills_at(state, remaining), z, traj, config) -
                       marginal_log_likelihood(skills_at(state, active), z, traj, config);
  const double ku = static_cast<double>(unique.size());
  if (!(std::log(uniform01(rng)) < delta - log_rate + 2.0 * std::log(ku))) return false;
  state.fit_signatures.erase(state.skills[static_cast<std::size_t>(k)].id);
  remove_skill(state, k);
  resample_modes(state, i, traj, config, rng);
  return true;
}

bool shared_death_move(SegmentationState& state, const std::vector<Trajectory>& demos, const SegmenterConfig& config,
                       Rng& rng) {
  if (state.num_skills() < 2) return false;
  const int k = uniform_int(rng, 0, state.num_skills() - 1);
  const auto kk = static_cast<Eigen::Index>(k);
  std::vector<int> rows;
  double delta = 0.0;
  for (int i = 0; i < state.num_trajectories(); ++i) {
    if (!state.features(i, kk)) continue;
    const auto active = state.active(i);
    if (active.size() == 1) return false;
    auto remaining = active;
    remaining.erase(std::find(remaining.begin(), remaining.end(), k));
    const auto& traj = demos[static_cast<std::size_t>(i)];
    const auto& z = state.z[static_cast<std::size_t>(i)];
    delta += marginal_log_likelihood(skills_at(state, remaining), z, traj, config) -
             marginal_log_likelihood(skills_at(state, active), z, traj, config);
    rows.push_back(i);
  }
  auto reduced = state.features;
  reduced.col(kk).setZero();
  delta += log_ibp_prior(reduced, config.bp_mass) - log_ibp_prior(state.features, config.bp_mass);
  if (!(std::log(uniform01(rng)) < delta)) return false;
  state.fit_signatures.erase(state.skills[static_cast<std::size_t>(k)].id);
  remove_skill(state, k);
  for (int i : rows) resample_modes(state, i, demos[static_cast<std::size_t>(i)], config, rng);
  return true;
}

namespace {

// Mean per-step log-probability of each skill's segments under skill a.
Eigen::VectorXd merge_scores(const SegmentationState& state, const std::map<int, std::vector<Segment>>& segments,
                             int a) {
  const Skill& skill_a = state.skills[static_cast<std::size_t>(a)];
  Eigen::VectorXd score = Eigen::VectorXd::Constant(state.num_skills(), -std::numeric_limits<double>::infinity());
  for (int k = 0; k < state.num_skills(); ++k) {
    const auto it = segments.find(state.skills[static_cast<std::size_t>(k)].id);
    if (k == a || it == segments.end()) continue;
    double total = 0.0;
    int steps = 0;
    for (const auto& seg : it->second)
      for (const auto& step : seg.steps) {
        total += skill_a.log_policy(step.state, to_index(step.action));
        ++steps;
      }
    if (steps > 0) score[k] = total / steps;
  }
  return score;
}

// Merges skills a and b when accept(delta) holds.
template <class Accept>
bool try_merge(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
               const std::map<int, std::vector<Segment>>& segments, int a, int b, const SegmenterConfig& config,
               Rng& rng, Accept accept) {
  const int id_a = state.skills[static_cast<std::size_t>(a)].id;
  const int id_b = state.skills[static_cast<std::size_t>(b)].id;

  std::vector<Trajectory> data;
  for (const auto& [id, segs] : segments)
    if (id == id_a || id == id_b)
      for (const auto& seg : segs) data.push_back(seg.as_trajectory());
  if (data.empty()) return false;
  Skill merged;
  try {
    auto fit = maxent_irl(gw, data, FeatureMap::one_hot(gw.num_states()), config.irl);
    merged = make_skill(gw, state.next_skill_id, std::move(fit.weights), config);
  } catch (const Error&) {
    return false;
  }

  // Proposed state: the merged skill replaces a and b everywhere.
  SegmentationState proposal = state;
  const auto ka = static_cast<Eigen::Index>(a);
  const auto kb = static_cast<Eigen::Index>(b);
  const Eigen::Index cols = proposal.features.cols();
  proposal.features.conservativeResize(Eigen::NoChange, cols + 1);
  proposal.features.col(cols) = (state.features.col(ka).array() + state.features.col(kb).array()).min(1).matrix();
  proposal.skills.push_back(merged);
  for (auto& zi : proposal.z)
    for (int& label : zi)
      if (label == id_a || label == id_b) label = merged.id;

  std::vector<int> rows;
  double delta = 0.0;
  for (int i = 0; i < state.num_trajectories(); ++i) {
    if (!state.features(i, ka) && !state.features(i, kb)) continue;
    rows.push_back(i);
    const auto& traj = demos[static_cast<std::size_t>(i)];
    auto after = proposal.active(i);
    after.erase(std::remove_if(after.begin(), after.end(), [&](int k) { return k == a || k == b; }), after.end());
    delta += marginal_log_likelihood(skills_at(proposal, after), proposal.z[static_cast<std::size_t>(i)], traj, config) -
             marginal_log_likelihood(skills_at(state, state.active(i)), state.z[static_cast<std::size_t>(i)], traj,
                                     config);
  }
  auto reduced = proposal.features;
  reduced.col(ka).setZero();
  reduced.col(kb).setZero();
  delta += log_ibp_prior(reduced, config.bp_mass) - log_ibp_prior(state.features, config.bp_mass);
  if (!accept(delta)) return false;

  // Keep the transition matrices in step with the new column order before
  // removing a and b, then redraw modes where anything changed.
  for (int i : rows) {
    const auto n = static_cast<Eigen::Index>(proposal.active(i).size());
    proposal.trans[static_cast<std::size_t>(i)] = Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  }
  proposal.fit_signatures.erase(id_a);
  proposal.fit_signatures.erase(id_b);
  remove_skill(proposal, std::max(a, b));
  remove_skill(proposal, std::min(a, b));
  ++proposal.next_skill_id;
  for (int i : rows) resample_modes(proposal, i, demos[static_cast<std::size_t>(i)], config, rng);
  state = std::move(proposal);
  return true;
}

}  // namespace

bool merge_move(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                const SegmenterConfig& config, Rng& rng) {
  if (state.num_skills() < 2) return false;
  const int a = uniform_int(rng, 0, state.num_skills() - 1);
  const auto segments = extract_segments(state, demos);
  // Partner b is drawn by how well a's policy explains b's steps.
  const Eigen::VectorXd score = merge_scores(state, segments, a);
  if (!std::isfinite(score.maxCoeff())) return false;
  const int b = sample_log_weights(rng, score);
  return try_merge(state, gw, demos, segments, a, b, config, rng,
                   [&](double delta) { return std::log(uniform01(rng)) < delta; });
}

int consolidate(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                const SegmenterConfig& config, Rng& rng) {
  int merged = 0;
  for (int a = 0; a < state.num_skills();) {
    const auto segments = extract_segments(state, demos);
    Eigen::Index b = 0;
    const Eigen::VectorXd score = merge_scores(state, segments, a);
    if (state.num_skills() >= 2 && std::isfinite(score.maxCoeff(&b)) &&
        try_merge(state, gw, demos, segments, a, static_cast<int>(b), config, rng,
                  [](double delta) { return delta > 0.0; })) {
      ++merged;
      a = 0;
    } else {
      ++a;
    }
  }
  return merged;
}

bool split_move(SegmentationState& state, const GridWorld& gw, const std::vector<Trajectory>& demos,
                const SegmenterConfig& config, Rng& rng) {
  if (state.num_skills() < 1) return false;
  const int k = uniform_int(rng, 0, state.num_skills() - 1);
  const int id = state.skills[static_cast<std::size_t>(k)].id;
  const auto all = extract_segments(state, demos);
  const auto found = all.find(id);
  if (found == all.end() || found->second.size() < 2) return false;
  const auto& segs = found->second;
  const int n = static_cast<int>(segs.size());
  const int first = uniform_int(rng, 0, n - 1);
  int second = uniform_int(rng, 0, n - 2);
  if (second >= first) ++second;

  const auto fmap = FeatureMap::one_hot(gw.num_states());
  auto fit = [&](const std::vector<Trajectory>& data, int skill_id) {
    auto result = maxent_irl(gw, data, fmap, config.irl);
    return make_skill(gw, skill_id, std::move(result.weights), config);
  };
  std::vector<int> side(static_cast<std::size_t>(n), -1);
  side[static_cast<std::size_t>(first)] = 0;
  side[static_cast<std::size_t>(second)] = 1;
  std::array<Skill, 2> parts;
  try {
    parts[0] = fit({segs[static_cast<std::size_t>(first)].as_trajectory()}, state.next_skill_id);
    parts[1] = fit({segs[static_cast<std::size_t>(second)].as_trajectory()}, state.next_skill_id + 1);
    for (int s = 0; s < n; ++s) {
      if (side[static_cast<std::size_t>(s)] >= 0) continue;
      const std::vector<Trajectory> one{segs[static_cast<std::size_t>(s)].as_trajectory()};
      const double la = own_log_likelihood(parts[0], one);
      const double lb = own_log_likelihood(parts[1], one);
      side[static_cast<std::size_t>(s)] = la == lb ? uniform_int(rng, 0, 1) : (la > lb ? 0 : 1);
    }
    for (int p = 0; p < 2; ++p) {
      std::vector<Trajectory> data;
      for (int s = 0; s < n; ++s)
        if (side[static_cast<std::size_t>(s)] == p) data.push_back(segs[static_cast<std::size_t>(s)].as_trajectory());
      parts[static_cast<std::size_t>(p)] = fit(data, parts[static_cast<std::size_t>(p)].id);
    }
  } catch (const Error&) {
    return false;
  }

  // Proposed state: columns for the two parts appended; k removed later.
  SegmentationState proposal = state;
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::Index cols = proposal.features.cols();
  proposal.features.conservativeResize(Eigen::NoChange, cols + 2);
  proposal.features.rightCols(2).setZero();
  std::map<int, int> row_of;
  for (int i = 0; i < state.num_trajectories(); ++i) row_of[demos[static_cast<std::size_t>(i)].id] = i;
  for (int s = 0; s < n; ++s) {
    const auto& seg = segs[static_cast<std::size_t>(s)];
    const int i = row_of.at(seg.trajectory_id);
    const int p = side[static_cast<std::size_t>(s)];
    proposal.features(i, cols + p) = 1;
    auto& zi = proposal.z[static_cast<std::size_t>(i)];
    for (std::size_t t = 0; t < seg.steps.size(); ++t)
      zi[static_cast<std::size_t>(seg.offset) + t] = parts[static_cast<std::size_t>(p)].id;
  }
  proposal.skills.push_back(parts[0]);
  proposal.skills.push_back(parts[1]);

  std::vector<int> rows;
  double delta = 0.0;
  for (int i = 0; i < state.num_trajectories(); ++i) {
    if (!state.features(i, kk)) continue;
    rows.push_back(i);
    const auto& traj = demos[static_cast<std::size_t>(i)];
    auto after = proposal.active(i);
    after.erase(std::remove(after.begin(), after.end(), k), after.end());
    if (after.empty()) return false;
    delta += marginal_log_likelihood(skills_at(proposal, after), proposal.z[static_cast<std::size_t>(i)], traj, config) -
             marginal_log_likelihood(skills_at(state, state.active(i)), state.z[static_cast<std::size_t>(i)], traj,
                                     config);
  }
  auto reduced = proposal.features;
  reduced.col(kk).setZero();
  delta += log_ibp_prior(reduced, config.bp_mass) - log_ibp_prior(state.features, config.bp_mass);
  if (!(std::log(uniform01(rng)) < delta)) return false;

  for (int i : rows) {
    const auto m = static_cast<Eigen::Index>(proposal.active(i).size());
    proposal.trans[static_cast<std::size_t>(i)] = Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  }
  proposal.fit_signatures.erase(id);
  remove_skill(proposal, k);
  proposal.next_skill_id += 2;
  for (int i : rows) resample_modes(proposal, i, demos[static_cast<std::size_t>(i)], config, rng);
  state = std::move(proposal);
  return true;
}

void prune_orphans(SegmentationState& state) {
  const auto counts = state.usage();
  for (int k = static_cast<int>(counts.size()) - 1; k >= 0; --k) {
    if (counts[static_cast<std::size_t>(k)] > 0) continue;
    state.fit_signatures.erase(state.skills[static_cast<std::size_t>(k)].id);
    remove_skill(state, k);
  }
}

SegmentationState initial_state(const GridWorld& gw, const std::vector<Trajectory>& demos,
                                const SegmenterConfig& config) {
  if (demos.empty()) throw Error("the sampler needs at least one demonstration");
  SegmentationState state;
  const auto m = static_cast<Eigen::Index>(demos.size());
  state.features = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Ones(m, 1);
  for (const auto& traj : demos) {
    state.z.emplace_back(static_cast<std::size_t>(traj.length()), 0);
    state.trans.push_back(Eigen::MatrixXd::Ones(1, 1));
  }
  Skill global;
  global.id = 0;
  state.skills.push_back(std::move(global));
  state.next_skill_id = 1;
  refit_skill_rewards(state, gw, demos, config);
  state.joint_log_likelihood = joint_log_likelihood(state, demos, config);
  return state;
}

SegmentationState run_sampler(const GridWorld& gw, const std::vector<Trajectory>& demos,
                              const SegmenterConfig& config, SamplerTrace* trace) {
  using Clock = std::chrono::steady_clock;
  const auto started = Clock::now();
  Rng rng(derive_seed(config.seed, {0x5e6ULL}));
  SegmentationState state = initial_state(gw, demos, config);
  SegmentationState best = state;
  if (trace) *trace = SamplerTrace{{state.joint_log_likelihood}, {state.num_skills()}, state.joint_log_likelihood, 0, 0};

  for (int sweep = 1; sweep <= config.sweeps; ++sweep) {
    if (config.time_budget_seconds > 0.0 &&
        std::chrono::duration<double>(Clock::now() - started).count() > config.time_budget_seconds)
      break;
    for (int i = 0; i < state.num_trajectories(); ++i) resample_trajectory(state, i, gw, demos, config, rng);
    for (int m = 0; m < config.moves_per_sweep; ++m) {
      birth_death_move(state, gw, demos, config, rng);
      shared_death_move(state, demos, config, rng);
    }
    for (int m = 0; m < config.split_merge_moves; ++m) {
      split_move(state, gw, demos, config, rng);
      merge_move(state, gw, demos, config, rng);
    }
    prune_orphans(state);
    if (config.refit_every > 0 && sweep % config.refit_every == 0) refit_skill_rewards(state, gw, demos, config);
    state.joint_log_likelihood = joint_log_likelihood(state, demos, config);
    assert(check_invariants(state).empty());
    const bool improved = state.joint_log_likelihood > best.joint_log_likelihood;
    if (improved) best = state;
    if (trace) {
      trace->joint_log_likelihood.push_back(state.joint_log_likelihood);
      trace->num_skills.push_back(state.num_skills());
      trace->sweeps_run = sweep;
      if (improved) {
        trace->best_log_likelihood = best.joint_log_likelihood;
        trace->best_sweep = sweep;
      }
    }
  }
  if (config.consolidate) {
    SegmentationState merged = best;
    if (consolidate(merged, gw, demos, config, rng) > 0) {
      prune_orphans(merged);
      refit_skill_rewards(merged, gw, demos, config);
      merged.joint_log_likelihood = joint_log_likelihood(merged, demos, config);
      if (merged.joint_log_likelihood > best.joint_log_likelihood) {
        best = std::move(merged);
        if (trace) trace->best_log_likelihood = best.joint_log_likelihood;
      }
    }
  }
  return best;
}

}  // namespace optlearn
