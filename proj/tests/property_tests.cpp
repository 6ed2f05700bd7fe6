#include "doctest.h"

#include "fixtures.hpp"
#include "optlearn/irl.hpp"
#include "optlearn/ocsvm.hpp"
#include "optlearn/segmenter.hpp"
#include "optlearn/smdp.hpp"
#include "qp_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

using namespace optlearn;

namespace {

std::vector<Point2> random_cloud(int n, Rng& rng) {
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(10.0 * uniform01(rng), 10.0 * uniform01(rng));
  return pts;
}

// Small random maps: a row of cells with an optional second row segment.
GridWorld random_small_map(Rng& rng) {
  const int width = uniform_int(rng, 2, 5);
  std::string text = std::string(static_cast<std::size_t>(width) + 2, '#') + "\n#" +
                     std::string(static_cast<std::size_t>(width), '.') + "#\n";
  const int extra = uniform_int(rng, 0, std::min(width, 5 - width));
  std::string second = "#" + std::string(static_cast<std::size_t>(extra), '.') +
                       std::string(static_cast<std::size_t>(width - extra), '#') + "#\n";
  text += second + std::string(static_cast<std::size_t>(width) + 2, '#') + "\n";
  return load_map(text);
}

}  // namespace

TEST_SUITE("properties") {

TEST_CASE("one-class SVM nu-property, feasibility and KKT gap") {
  Rng rng(2024);
  for (int n : {10, 50, 200}) {
    for (double nu : {0.1, 0.3}) {
      for (int rep = 0; rep < 5; ++rep) {
        CAPTURE(n);
        CAPTURE(nu);
        CAPTURE(rep);
        const auto pts = random_cloud(n, rng);
        const auto fit = fit_ocsvm(pts, nu, 0.5);
        const double c = 1.0 / (nu * n);
        CHECK(fit.model.kkt_gap <= 1e-6);
        CHECK(fit.training_alphas.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.training_alphas.minCoeff() >= 0.0);
        CHECK(fit.training_alphas.maxCoeff() <= c * (1.0 + 1e-12));
        int outliers = 0;
        int support = 0;
        for (int i = 0; i < n; ++i) {
          if (fit.model.decision(pts[static_cast<std::size_t>(i)]) < -kBoundaryTolerance) ++outliers;
          if (fit.training_alphas[i] > 0.0) ++support;
        }
        CHECK(static_cast<double>(outliers) / n <= nu + 2.0 / n);
        CHECK(static_cast<double>(support) / n >= nu - 2.0 / n);
      }
    }
  }
}

TEST_CASE("one-class SVM agrees with the dense reference solver") {
  Rng rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = uniform_int(rng, 3, 20);
    const double nu = rep % 2 ? 0.3 : 0.1;
    const auto pts = random_cloud(n, rng);
    const auto fit = fit_ocsvm(pts, nu, 0.5);
    const auto oracle = testing::brute_force_ocsvm_dual(pts, nu, 0.5);
    CAPTURE(rep);
    CHECK((fit.training_alphas - oracle).lpNorm<Eigen::Infinity>() <= 1e-4);
  }
}

TEST_CASE("one-class SVM is invariant to input order and deterministic") {
  Rng rng(3);
  const auto pts = random_cloud(40, rng);
  auto shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto a = fit_ocsvm(pts, 0.2, 0.5);
  const auto b = fit_ocsvm(shuffled, 0.2, 0.5);
  const auto again = fit_ocsvm(pts, 0.2, 0.5);
  CHECK(a.training_alphas == again.training_alphas);
  CHECK(a.model.rho == again.model.rho);
  for (int i = 0; i < 30; ++i) {
    const Point2 x(12.0 * uniform01(rng) - 1.0, 12.0 * uniform01(rng) - 1.0);
    CHECK(a.model.decision(x) == doctest::Approx(b.model.decision(x)).epsilon(1e-7));
  }
}

TEST_CASE("IRL gradient matches finite differences on random small instances") {
  Rng rng(99);
  for (int rep = 0; rep < 25; ++rep) {
    const auto gw = random_small_map(rng);
    const int n = gw.num_states();
    REQUIRE(n <= 5);
    const auto fmap = FeatureMap::one_hot(n);
    std::vector<Trajectory> demos;
    const int count = uniform_int(rng, 1, 4);
    for (int d = 0; d < count; ++d) {
      std::vector<Action> actions;
      const int len = uniform_int(rng, 1, 3);  // at most 4 visited states
      for (int t = 0; t < len; ++t) actions.push_back(action_from_index(uniform_int(rng, 0, 3)));
      demos.push_back(testing::make_traj(gw, d, uniform_int(rng, 0, n - 1), actions));
    }
    Eigen::VectorXd theta(n);
    for (int k = 0; k < n; ++k) theta[k] = 2.0 * uniform01(rng) - 1.0;
    const Eigen::VectorXd grad =
        empirical_feature_expectations(demos, fmap) - expected_feature_expectations(gw, demos, fmap, theta);
    for (int k = 0; k < n; ++k) {
      Eigen::VectorXd up = theta, down = theta;
      up[k] += 1e-6;
      down[k] -= 1e-6;
      const double fd = (irl_log_likelihood(gw, demos, fmap, up) - irl_log_likelihood(gw, demos, fmap, down)) / 2e-6;
      CHECK(std::abs(fd - grad[k]) <= 1e-4 * std::max(1.0, std::abs(grad[k])));
    }
    // A constant shift of every state reward cancels in the path distribution.
    const double shifted = irl_log_likelihood(gw, demos, fmap, (theta.array() + 0.7).matrix());
    CHECK(shifted == doctest::Approx(irl_log_likelihood(gw, demos, fmap, theta)).epsilon(1e-10));
  }
}

TEST_CASE("visitation counts sum to the horizon") {
  Rng rng(4);
  const auto gw = four_rooms();
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd theta(gw.num_states());
    for (int k = 0; k < theta.size(); ++k) theta[k] = uniform01(rng) - 0.5;
    Eigen::VectorXd start = Eigen::VectorXd::Zero(gw.num_states());
    start[uniform_int(rng, 0, gw.num_states() - 1)] = 1.0;
    const int h = uniform_int(rng, 1, 30);
    const auto d = expected_state_visitations(gw, theta, FeatureMap::one_hot(gw.num_states()), h, start);
    CHECK(d.sum() == doctest::Approx(static_cast<double>(h)).epsilon(1e-10));
    CHECK(d.minCoeff() >= 0.0);
  }
}

TEST_CASE("backward sampling matches exact posteriors over length-6 sequences") {
  Rng rng(6);
  const int steps = 6;
  Eigen::MatrixXd e(steps, 2);
  for (int t = 0; t < steps; ++t) e.row(t) << -2.0 * uniform01(rng), -2.0 * uniform01(rng);
  Eigen::MatrixXd m(2, 2);
  m << 0.8, 0.2, 0.35, 0.65;
  const double log_z = forward_log_likelihood(e, m);
  std::map<std::vector<int>, int> counts;
  const int draws = 200000;
  for (int d = 0; d < draws; ++d) ++counts[sample_mode_sequence(e, m, rng)];
  double total = 0.0;
  double worst = 0.0;
  for (int code = 0; code < 64; ++code) {
    std::vector<int> z(steps);
    for (int t = 0; t < steps; ++t) z[static_cast<std::size_t>(t)] = (code >> t) & 1;
    double lp = -std::log(2.0) + e(0, z[0]);
    for (int t = 1; t < steps; ++t) lp += std::log(m(z[t - 1], z[t])) + e(t, z[t]);
    const double p = std::exp(lp - log_z);
    total += p;
    worst = std::max(worst, std::abs(static_cast<double>(counts[z]) / draws - p));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(worst < 0.005);
}

TEST_CASE("feature prior ignores column order") {
  Rng rng(12);
  for (int rep = 0; rep < 10; ++rep) {
    const int rows = uniform_int(rng, 1, 6);
    const int cols = uniform_int(rng, 1, 5);
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> f(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) f(r, c) = uniform01(rng) < 0.5;
    std::vector<int> perm(static_cast<std::size_t>(cols));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto g = f;
    for (int c = 0; c < cols; ++c) g.col(c) = f.col(perm[static_cast<std::size_t>(c)]);
    CHECK(log_ibp_prior(f, 2.0) == doctest::Approx(log_ibp_prior(g, 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("without options the SMDP learner reproduces q-learning exactly") {
  const auto gw = four_rooms();
  Rng rng(31);
  for (int rep = 0; rep < 6; ++rep) {
    const State goal = uniform_int(rng, 0, gw.num_states() - 1);
    const auto reward = RewardFunction::goal_reward(gw, goal);
    const std::uint64_t seed = rng();
    SmdpParams sp;
    sp.episodes = 40;
    QLearningParams qp;
    qp.episodes = 40;
    qp.seed = seed;
    CHECK(smdp_q_learning(gw, reward, {}, sp, seed).q == q_learning(gw, reward, qp).values);
  }
}

TEST_CASE("option returns discount by duration") {
  const auto gw = testing::chain(8);
  const auto reward = RewardFunction::goal_reward(gw, 7);
  for (int stop = 1; stop < 7; ++stop) {
    Option o;
    o.initiation.assign(8, 0);
    o.termination.assign(8, 0);
    o.policy.assign(8, -1);
    for (int s = 0; s < stop; ++s) {
      o.initiation[static_cast<std::size_t>(s)] = 1;
      o.policy[static_cast<std::size_t>(s)] = to_index(Action::Right);
    }
    o.termination[static_cast<std::size_t>(stop)] = 1;
    const auto out = execute_option(gw, reward, o, 0, 0.9);
    CHECK(out.duration == stop);
    CHECK(out.reward == doctest::Approx(-(1.0 - std::pow(0.9, stop)) / 0.1).epsilon(1e-12));
  }
}

TEST_CASE("value iteration greedy paths are shortest paths") {
  const auto gw = four_rooms();
  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const State goal = uniform_int(rng, 0, gw.num_states() - 1);
    const auto reward = RewardFunction::goal_reward(gw, goal);
    const auto q = value_iteration(gw, reward, 0.9);
    CHECK(bellman_residual(gw, reward, q) <= 1e-8);
    const auto policy = greedy_policy(q);
    const auto dist = bfs_distances(gw, goal);
    for (State s = 0; s < gw.num_states(); ++s) {
      const auto path = rollout(gw, policy, s, goal, 500);
      CHECK(static_cast<int>(path.size()) - 1 == dist[static_cast<std::size_t>(s)]);
    }
  }
}

}  // TEST_SUITE
