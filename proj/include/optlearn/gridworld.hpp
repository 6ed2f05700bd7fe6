#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace optlearn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using State = int;

enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kActions = {Action::Up, Action::Down, Action::Left,
                                                             Action::Right};

inline int to_index(Action a) { return static_cast<int>(a); }
Action action_from_index(int i);

enum class Cell : std::uint8_t { Wall, Floor, Hallway };

struct Coord {
  int row = 0;
  int col = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

inline int manhattan(Coord a, Coord b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

/// Deterministic tabular grid MDP. Non-wall cells are numbered row-major.
class GridWorld {
 public:
  GridWorld(int width, int height, std::vector<Cell> cells);

  int width() const { return width_; }
  int height() const { return height_; }
  int num_states() const { return static_cast<int>(coords_.size()); }

  Cell cell(Coord c) const { return cells_[static_cast<std::size_t>(c.row * width_ + c.col)]; }
  bool is_wall(Coord c) const;

  Coord coord(State s) const { return coords_.at(static_cast<std::size_t>(s)); }
  std::optional<State> state_at(Coord c) const;
  /// Throws if `c` is a wall or outside the grid.
  State state(Coord c) const;
  State state(int row, int col) const { return state({row, col}); }

  bool valid(State s) const { return s >= 0 && s < num_states(); }
  bool is_hallway(State s) const { return cell(coord(s)) == Cell::Hallway; }
  const std::vector<State>& hallways() const { return hallways_; }

  /// Successor of `s` under `a`; bumping into a wall leaves the agent in place.
  State step(State s, Action a) const {
    return next_[static_cast<std::size_t>(s) * kNumActions + static_cast<std::size_t>(to_index(a))];
  }

  /// Non-wall 4-neighbours of a state (no self loops, no duplicates).
  std::vector<State> neighbors(State s) const;

 private:
  int width_;
  int height_;
  std::vector<Cell> cells_;
  std::vector<Coord> coords_;
  std::vector<int> index_;  // cell -> state id, -1 for walls
  std::vector<State> hallways_;
  std::vector<State> next_;
};

/// Parses '#', '.', '=' ASCII maps. With `strict_four_rooms` the map must
/// have exactly 104 open cells and 4 hallways.
GridWorld load_map(std::string_view text, bool strict_four_rooms = false);
GridWorld load_map_file(const std::string& path, bool strict_four_rooms = false);

/// The canonical 13x13 four-rooms layout (identical to maps/four_rooms.txt).
std::string_view four_rooms_text();
GridWorld four_rooms();

/// Reward on entering a state; entering an absorbing state ends the episode.
struct RewardFunction {
  Eigen::VectorXd on_enter;     // indexed by successor state
  std::vector<bool> absorbing;  // terminal states

  double operator()(State /*s*/, Action /*a*/, State next) const { return on_enter[next]; }
  bool terminal(State s) const { return absorbing[static_cast<std::size_t>(s)]; }

  /// 10 on entering `goal`, -1 otherwise; `goal` is absorbing.
  static RewardFunction goal_reward(const GridWorld& gw, State goal, double goal_value = 10.0,
                                    double step_value = -1.0);
  /// Per-state reward vector with no terminal states.
  static RewardFunction state_reward(const Eigen::VectorXd& rewards);
};

/// Action values, one row per state and one column per action.
struct QTable {
  Eigen::MatrixXd values;
  double discount = 0.9;

  QTable() = default;
  QTable(int num_states, double gamma) : values(Eigen::MatrixXd::Zero(num_states, kNumActions)), discount(gamma) {}

  double operator()(State s, Action a) const { return values(s, to_index(a)); }
  double& operator()(State s, Action a) { return values(s, to_index(a)); }
};

/// Largest |Q(s,a) - (R + discount * max Q(s',.))| over all state-action pairs.
double bellman_residual(const GridWorld& gw, const RewardFunction& reward, const QTable& q);

/// Synchronous value iteration on action values. Throws when the residual
/// does not drop below `tol` within 10 * ceil(log(tol) / log(discount)) sweeps.
QTable value_iteration(const GridWorld& gw, const RewardFunction& reward, double discount, double tol = 1e-8);

/// Row-wise log-softmax of `tau * q`, max-subtracted.
template <typename Derived>
Eigen::MatrixXd log_boltzmann(const Eigen::MatrixBase<Derived>& q, double tau) {
  Eigen::MatrixXd out(q.rows(), q.cols());
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    const auto scaled = (q.row(r).template cast<double>() * tau).eval();
    const double m = scaled.maxCoeff();
    const double lse = m + std::log((scaled.array() - m).exp().sum());
    out.row(r) = scaled.array() - lse;
  }
  return out;
}

/// Per-state action distribution proportional to exp(tau * Q(s, .)).
Eigen::MatrixXd boltzmann_policy(const QTable& q, double tau);

/// Argmax action per state; ties go to the earliest action in Up, Down, Left, Right.
std::vector<Action> greedy_policy(const QTable& q);
Action greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Breadth-first shortest-path distances to `target` (-1 when unreachable).
std::vector<int> bfs_distances(const GridWorld& gw, State target);

/// Follows a deterministic policy from `start`; returns the visited states
/// including `start`. Stops at `goal` or after `max_steps`.
std::vector<State> rollout(const GridWorld& gw, const std::vector<Action>& policy, State start, State goal,
                           int max_steps);

// Four-rooms structure ------------------------------------------------------

/// A hallway cell together with its two non-wall neighbours.
std::vector<State> hallway_zone(const GridWorld& gw, State hallway);
/// Union of all hallway zones.
std::vector<State> hallway_zone_states(const GridWorld& gw);

/// Connected components of the floor after removing every hallway; ids are
/// ordered by the smallest state in each room. Hallways map to -1.
std::vector<int> room_labels(const GridWorld& gw);

}  // namespace optlearn
