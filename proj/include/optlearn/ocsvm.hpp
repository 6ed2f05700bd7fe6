#pragma once

#include "optlearn/gridworld.hpp"

#include <Eigen/Dense>

#include <vector>

namespace optlearn {

using Point2 = Eigen::Vector2d;

/// exp(-kernel_gamma * |x - y|^2)
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rbf_kernel(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& y,
                                     typename DerivedA::Scalar kernel_gamma) {
  return std::exp(-kernel_gamma * (x - y).squaredNorm());
}

/// Grid coordinates of a state as a point (row, col).
inline Point2 state_point(const GridWorld& gw, State s) {
  const Coord c = gw.coord(s);
  return {static_cast<double>(c.row), static_cast<double>(c.col)};
}

/// Training points with decision values at or above -kBoundaryTolerance count as inside.
inline constexpr double kBoundaryTolerance = 1e-9;

/// One-class SVM with an RBF kernel: decision(x) = sum_i alpha_i K(x_i, x) - rho.
struct OcSvmModel {
  std::vector<Point2> support_points;
  Eigen::VectorXd alphas;  // one per support point, summing to 1
  double rho = 0.0;
  double kernel_gamma = 0.5;
  double nu = 0.1;
  int num_training = 0;
  double kkt_gap = 0.0;
  int iterations = 0;

  double decision(const Point2& x) const;
  bool inside(const Point2& x) const { return decision(x) >= -kBoundaryTolerance; }
};

struct OcSvmFit {
  OcSvmModel model;
  /// Dual variable of every training point, in input order.
  Eigen::VectorXd training_alphas;
};

/// Solves min 1/2 a'Ka s.t. 0 <= a_i <= 1/(nu n), sum a = 1 by pairwise
/// updates on the maximal violating pair, until the KKT gap is <= tol.
/// Duplicate points are merged into one variable with a proportionally
/// larger box, which leaves the decision function unchanged.
OcSvmFit fit_ocsvm(const std::vector<Point2>& points, double nu, double kernel_gamma, double tol = 1e-10,
                   int max_iterations = 1000000);

/// Open states whose coordinates lie inside the model's region.
std::vector<State> classify_states(const OcSvmModel& model, const GridWorld& gw);

}  // namespace optlearn
