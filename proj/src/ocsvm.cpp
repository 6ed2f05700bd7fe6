#include "optlearn/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace optlearn {

double OcSvmModel::decision(const Point2& x) const {
  double total = 0.0;
  for (std::size_t i = 0; i < support_points.size(); ++i)
    total += alphas[static_cast<Eigen::Index>(i)] * rbf_kernel(support_points[i], x, kernel_gamma);
  return total - rho;
}

OcSvmFit fit_ocsvm(const std::vector<Point2>& points, double nu, double kernel_gamma, double tol, int max_iterations) {
  if (points.empty()) throw Error("one-class SVM needs at least one training point");
  if (!(nu > 0.0 && nu < 1.0)) throw Error("nu must lie in (0, 1)");
  if (!(kernel_gamma > 0.0)) throw Error("kernel gamma must be positive");

  // Merge duplicates; first-occurrence order keeps the fit deterministic.
  std::vector<Point2> unique;
  std::vector<int> slot(points.size());
  std::vector<double> multiplicity;
  {
    std::map<std::pair<double, double>, int> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto key = std::make_pair(points[i].x(), points[i].y());
      auto [it, inserted] = seen.emplace(key, static_cast<int>(unique.size()));
      if (inserted) {
        unique.push_back(points[i]);
        multiplicity.push_back(0.0);
      }
      slot[i] = it->second;
      multiplicity[static_cast<std::size_t>(it->second)] += 1.0;
    }
  }
  const auto n = static_cast<double>(points.size());
  const auto u = static_cast<Eigen::Index>(unique.size());
  const double c = 1.0 / (nu * n);
  Eigen::VectorXd upper(u);
  for (Eigen::Index i = 0; i < u; ++i) upper[i] = multiplicity[static_cast<std::size_t>(i)] * c;

  Eigen::MatrixXd kernel(u, u);
  for (Eigen::Index i = 0; i < u; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      kernel(i, j) = kernel(j, i) = rbf_kernel(unique[static_cast<std::size_t>(i)], unique[static_cast<std::size_t>(j)], kernel_gamma);

  // Feasible start: fill boxes in order until the mass reaches one.
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(u);
  double remaining = 1.0;
  for (Eigen::Index i = 0; i < u && remaining > 0.0; ++i) {
    alpha[i] = std::min(upper[i], remaining);
    remaining -= alpha[i];
  }
  Eigen::VectorXd grad = kernel * alpha;

  auto gap_and_pair = [&](Eigen::Index& up, Eigen::Index& low) {
    double best_up = -std::numeric_limits<double>::infinity();
    double best_low = std::numeric_limits<double>::infinity();
    up = low = -1;
    for (Eigen::Index t = 0; t < u; ++t) {
      if (alpha[t] < upper[t] && -grad[t] > best_up) {
        best_up = -grad[t];
        up = t;
      }
      if (alpha[t] > 0.0 && -grad[t] < best_low) {
        best_low = -grad[t];
        low = t;
      }
    }
    return (up < 0 || low < 0) ? 0.0 : best_up - best_low;
  };

  int it = 0;
  Eigen::Index i = -1;
  Eigen::Index j = -1;
  double gap = gap_and_pair(i, j);
  while (gap > tol) {
    if (it >= max_iterations) {
      std::ostringstream msg;
      msg << "one-class SVM did not converge in " << max_iterations << " iterations (KKT gap " << gap << ")";
      throw Error(msg.str());
    }
    // Move mass from j to i along the feasible direction e_i - e_j.
    const double curvature = std::max(kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j), 1e-12);
    double step = (grad[j] - grad[i]) / curvature;
    step = std::min({step, upper[i] - alpha[i], alpha[j]});
    alpha[i] += step;
    alpha[j] -= step;
    if (upper[i] - alpha[i] < 1e-15 * upper[i]) alpha[i] = upper[i];
    if (alpha[j] < 1e-18) alpha[j] = 0.0;
    grad += step * (kernel.col(i) - kernel.col(j));
    ++it;
    gap = gap_and_pair(i, j);
  }
  // Renormalise away accumulated rounding in the equality constraint.
  alpha /= alpha.sum();
  alpha = alpha.cwiseMin(upper);
  grad = kernel * alpha;

  double free_sum = 0.0;
  int free_count = 0;
  double lower_bound = -std::numeric_limits<double>::infinity();  // max G over bounded-at-upper points
  double upper_bound = std::numeric_limits<double>::infinity();   // min G over zero points
  for (Eigen::Index t = 0; t < u; ++t) {
    if (alpha[t] > 0.0 && alpha[t] < upper[t]) {
      free_sum += grad[t];
      ++free_count;
    } else if (alpha[t] >= upper[t]) {
      lower_bound = std::max(lower_bound, grad[t]);
    } else {
      upper_bound = std::min(upper_bound, grad[t]);
    }
  }
  double rho;
  if (free_count > 0)
    rho = free_sum / free_count;
  else if (std::isfinite(lower_bound) && std::isfinite(upper_bound))
    rho = 0.5 * (lower_bound + upper_bound);
  else
    rho = std::isfinite(lower_bound) ? lower_bound : upper_bound;

  OcSvmFit fit;
  fit.model.kernel_gamma = kernel_gamma;
  fit.model.nu = nu;
  fit.model.rho = rho;
  fit.model.num_training = static_cast<int>(points.size());
  fit.model.kkt_gap = gap;
  fit.model.iterations = it;
  std::vector<double> kept;
  for (Eigen::Index t = 0; t < u; ++t) {
    if (alpha[t] <= 0.0) continue;
    fit.model.support_points.push_back(unique[static_cast<std::size_t>(t)]);
    kept.push_back(alpha[t]);
  }
  fit.model.alphas = Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
  fit.training_alphas.resize(static_cast<Eigen::Index>(points.size()));
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto k = static_cast<Eigen::Index>(slot[p]);
    fit.training_alphas[static_cast<Eigen::Index>(p)] = alpha[k] / multiplicity[static_cast<std::size_t>(k)];
  }
  return fit;
}

std::vector<State> classify_states(const OcSvmModel& model, const GridWorld& gw) {
  std::vector<State> out;
  for (State s = 0; s < gw.num_states(); ++s)
    if (model.inside(state_point(gw, s))) out.push_back(s);
  return out;
}

}  // namespace optlearn
