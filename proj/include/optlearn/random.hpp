#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace optlearn {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; used to derive independent streams from a root seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix_seed(root);
  for (auto p : path) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

/// Draws from Dirichlet(alpha) via normalised gamma variates.
inline Eigen::VectorXd sample_dirichlet(Rng& rng, const Eigen::VectorXd& alpha) {
  Eigen::VectorXd x(alpha.size());
  for (Eigen::Index k = 0; k < alpha.size(); ++k) x[k] = std::gamma_distribution<double>(alpha[k], 1.0)(rng);
  const double total = x.sum();
  if (!(total > 0.0)) {
    // All draws underflowed (tiny concentrations): fall back to the mean.
    return alpha / alpha.sum();
  }
  return x / total;
}

/// Index drawn proportionally to exp(logw), max-subtracted.
inline int sample_log_weights(Rng& rng, const Eigen::VectorXd& logw) {
  const double m = logw.maxCoeff();
  const Eigen::VectorXd w = (logw.array() - m).exp().matrix();
  double u = uniform01(rng) * w.sum();
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    u -= w[k];
    if (u <= 0.0) return static_cast<int>(k);
  }
  for (Eigen::Index k = w.size() - 1; k >= 0; --k)
    if (w[k] > 0.0) return static_cast<int>(k);
  return 0;
}

inline double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace optlearn
