#include "doctest.h"

#include "fixtures.hpp"
#include "optlearn/irl.hpp"

#include <cmath>
#include <limits>

using namespace optlearn;
using optlearn::testing::chain;
using optlearn::testing::make_traj;

TEST_SUITE("irl") {

TEST_CASE("visitation counts on a four-state chain") {
  const auto gw = chain(4);
  const auto fmap = FeatureMap::one_hot(4);
  Eigen::VectorXd theta(4);
  theta << 0.2, -0.5, 0.7, 0.1;
  Eigen::VectorXd start = Eigen::VectorXd::Zero(4);
  start[0] = 1.0;
  const auto d = expected_state_visitations(gw, theta, fmap, 3, start);
  // Reference from brute-force enumeration of the 16 action sequences.
  CHECK(d[0] == doctest::Approx(2.62513491).epsilon(1e-8));
  CHECK(d[1] == doctest::Approx(0.30829223).epsilon(1e-8));
  CHECK(d[2] == doctest::Approx(0.06657286).epsilon(1e-8));
  CHECK(d[3] == doctest::Approx(0.0));
  CHECK(d.sum() == doctest::Approx(3.0));
}

TEST_CASE("horizon one visits only the start") {
  const auto gw = chain(3);
  Eigen::VectorXd start(3);
  start << 0.25, 0.5, 0.25;
  const auto d = expected_state_visitations(gw, Eigen::VectorXd::Zero(3), FeatureMap::one_hot(3), 1, start);
  CHECK((d - start).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK_THROWS_AS(expected_state_visitations(gw, Eigen::VectorXd::Zero(3), FeatureMap::one_hot(3), 0, start), Error);
}

TEST_CASE("empirical feature expectations average visited states") {
  const auto gw = chain(3);
  const std::vector<Trajectory> demos = {make_traj(gw, 0, 0, {Action::Right, Action::Right}),
                                         make_traj(gw, 1, 1, {Action::Right})};
  const auto mu = empirical_feature_expectations(demos, FeatureMap::one_hot(3));
  CHECK(mu[0] == doctest::Approx(0.5));
  CHECK(mu[1] == doctest::Approx(1.0));
  CHECK(mu[2] == doctest::Approx(1.0));
}

TEST_CASE("mixed demo lengths each use their own horizon") {
  const auto gw = chain(3);
  const auto fmap = FeatureMap::one_hot(3);
  const std::vector<Trajectory> demos = {make_traj(gw, 0, 0, {Action::Right, Action::Right}),
                                         make_traj(gw, 1, 1, {Action::Right})};
  Eigen::VectorXd theta(3);
  theta << -0.3, 0.4, 1.1;
  Eigen::VectorXd s0 = Eigen::VectorXd::Zero(3), s1 = Eigen::VectorXd::Zero(3);
  s0[0] = 1.0;
  s1[1] = 1.0;
  const Eigen::VectorXd expected =
      0.5 * (expected_state_visitations(gw, theta, fmap, 3, s0) + expected_state_visitations(gw, theta, fmap, 2, s1));
  CHECK((expected_feature_expectations(gw, demos, fmap, theta) - expected).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("gradient of the log-likelihood is empirical minus expected features") {
  const auto gw = chain(4);
  const auto fmap = FeatureMap::one_hot(4);
  const std::vector<Trajectory> demos = {make_traj(gw, 0, 0, {Action::Right, Action::Right, Action::Right}),
                                         make_traj(gw, 1, 1, {Action::Left, Action::Right}),
                                         make_traj(gw, 2, 3, {Action::Left, Action::Up, Action::Left})};
  Eigen::VectorXd theta(4);
  theta << 0.3, -0.2, 0.5, -0.1;
  const Eigen::VectorXd grad =
      empirical_feature_expectations(demos, fmap) - expected_feature_expectations(gw, demos, fmap, theta);
  const double h = 1e-6;
  for (int k = 0; k < 4; ++k) {
    Eigen::VectorXd up = theta, down = theta;
    up[k] += h;
    down[k] -= h;
    const double fd = (irl_log_likelihood(gw, demos, fmap, up) - irl_log_likelihood(gw, demos, fmap, down)) / (2 * h);
    CHECK(std::abs(fd - grad[k]) <= 1e-4 * std::max(1.0, std::abs(grad[k])));
  }
}

TEST_CASE("gradient ascent matches feature expectations") {
  const auto gw = chain(3);
  Eigen::VectorXd truth(3);
  truth << -0.5, 0.2, 0.9;
  const auto demos = optlearn::testing::all_paths_corpus(gw, 0, 3, truth, 200);
  const auto fmap = FeatureMap::one_hot(3);
  IrlParams p;
  p.iterations = 5000;
  p.tolerance = 1e-3;
  const auto fit = maxent_irl(gw, demos, fmap, p);
  CHECK(fit.converged);
  const Eigen::VectorXd gap = empirical_feature_expectations(demos, fmap) -
                              expected_feature_expectations(gw, demos, fmap, fit.weights.theta);
  CHECK(gap.lpNorm<Eigen::Infinity>() <= 1e-2);
}

TEST_CASE("irl input errors") {
  const auto gw = chain(3);
  CHECK_THROWS_AS(maxent_irl(gw, {}, FeatureMap::one_hot(3)), Error);
  const std::vector<Trajectory> demos = {make_traj(gw, 0, 0, {Action::Right})};
  CHECK_THROWS_AS(maxent_irl(gw, demos, FeatureMap::one_hot(5)), Error);
  IrlParams p;
  p.learning_rate = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(maxent_irl(gw, demos, FeatureMap::one_hot(3), p), IrlDivergence);
}

}  // TEST_SUITE
