#pragma once

#include "optlearn/demo.hpp"
#include "optlearn/gridworld.hpp"
#include "optlearn/irl.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace optlearn::testing {

/// A single row of `n` open cells.
inline GridWorld chain(int n) {
  const std::string wall(static_cast<std::size_t>(n) + 2, '#');
  return load_map(wall + "\n#" + std::string(static_cast<std::size_t>(n), '.') + "#\n" + wall + "\n");
}

inline Trajectory make_traj(const GridWorld& gw, int id, State start, const std::vector<Action>& actions) {
  Trajectory t;
  t.id = id;
  State s = start;
  for (Action a : actions) {
    t.steps.push_back({s, a});
    s = gw.step(s, a);
  }
  t.final_state = s;
  t.goal = s;
  return t;
}

/// Every action sequence of length `len` from `start`, each repeated in
/// proportion to its maximum-entropy probability under `theta` (at least
/// once). The empirical feature counts then sit strictly inside the model's
/// range, so feature matching has a finite optimum.
inline std::vector<Trajectory> all_paths_corpus(const GridWorld& gw, State start, int len,
                                                const Eigen::VectorXd& theta, int scale) {
  std::vector<std::vector<Action>> seqs(1);
  for (int t = 0; t < len; ++t) {
    std::vector<std::vector<Action>> next;
    for (const auto& s : seqs)
      for (Action a : kActions) {
        auto e = s;
        e.push_back(a);
        next.push_back(e);
      }
    seqs = std::move(next);
  }
  std::vector<double> weight;
  double total = 0.0;
  for (const auto& s : seqs) {
    const auto tr = make_traj(gw, 0, start, s);
    double r = 0.0;
    for (State v : tr.states()) r += theta[v];
    weight.push_back(std::exp(r));
    total += weight.back();
  }
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const int copies = std::max(1, static_cast<int>(std::lround(scale * weight[i] / total)));
    for (int c = 0; c < copies; ++c) out.push_back(make_traj(gw, static_cast<int>(out.size()), start, seqs[i]));
  }
  return out;
}

}  // namespace optlearn::testing
