#include "optlearn/gridworld.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

namespace optlearn {

namespace {

constexpr std::array<Coord, kNumActions> kOffsets = {Coord{-1, 0}, Coord{1, 0}, Coord{0, -1}, Coord{0, 1}};

constexpr std::string_view kFourRooms =
    "#############\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "#.....=.....#\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "##=####.....#\n"
    "#.....###=###\n"
    "#.....#.....#\n"
    "#.....#.....#\n"
    "#.....=.....#\n"
    "#.....#.....#\n"
    "#############\n";

}  // namespace

Action action_from_index(int i) {
  if (i < 0 || i >= kNumActions) throw Error("action index out of range: " + std::to_string(i));
  return static_cast<Action>(i);
}

GridWorld::GridWorld(int width, int height, std::vector<Cell> cells)
    : width_(width), height_(height), cells_(std::move(cells)) {
  if (width_ <= 0 || height_ <= 0 || cells_.size() != static_cast<std::size_t>(width_ * height_))
    throw Error("grid dimensions do not match cell count");
  index_.assign(cells_.size(), -1);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      const auto k = static_cast<std::size_t>(r * width_ + c);
      if (cells_[k] == Cell::Wall) continue;
      index_[k] = static_cast<int>(coords_.size());
      if (cells_[k] == Cell::Hallway) hallways_.push_back(index_[k]);
      coords_.push_back({r, c});
    }
  }
  next_.resize(coords_.size() * kNumActions);
  for (std::size_t s = 0; s < coords_.size(); ++s) {
    for (int a = 0; a < kNumActions; ++a) {
      const Coord to{coords_[s].row + kOffsets[static_cast<std::size_t>(a)].row,
                     coords_[s].col + kOffsets[static_cast<std::size_t>(a)].col};
      next_[s * kNumActions + static_cast<std::size_t>(a)] = is_wall(to) ? static_cast<State>(s) : *state_at(to);
    }
  }
}

bool GridWorld::is_wall(Coord c) const {
  if (c.row < 0 || c.col < 0 || c.row >= height_ || c.col >= width_) return true;
  return cell(c) == Cell::Wall;
}

std::optional<State> GridWorld::state_at(Coord c) const {
  if (is_wall(c)) return std::nullopt;
  return index_[static_cast<std::size_t>(c.row * width_ + c.col)];
}

State GridWorld::state(Coord c) const {
  if (auto s = state_at(c)) return *s;
  throw Error("no open cell at (" + std::to_string(c.row) + "," + std::to_string(c.col) + ")");
}

std::vector<State> GridWorld::neighbors(State s) const {
  std::vector<State> out;
  for (Action a : kActions) {
    const State n = step(s, a);
    if (n != s && std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  }
  return out;
}

GridWorld load_map(std::string_view text, bool strict_four_rooms) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error("map is empty");
  const auto width = lines.front().size();
  std::vector<Cell> cells;
  cells.reserve(width * lines.size());
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].size() != width) throw Error("map is not rectangular (row " + std::to_string(r) + ")");
    for (std::size_t c = 0; c < width; ++c) {
      const char ch = lines[r][c];
      const bool border = r == 0 || c == 0 || r + 1 == lines.size() || c + 1 == width;
      Cell cell;
      switch (ch) {
        case '#': cell = Cell::Wall; break;
        case '.': cell = Cell::Floor; break;
        case '=': cell = Cell::Hallway; break;
        default: throw Error(std::string("unknown map character '") + ch + "'");
      }
      if (border && cell != Cell::Wall)
        throw Error("map border has an opening at (" + std::to_string(r) + "," + std::to_string(c) + ")");
      cells.push_back(cell);
    }
  }
  GridWorld gw(static_cast<int>(width), static_cast<int>(lines.size()), std::move(cells));
  if (strict_four_rooms) {
    if (gw.num_states() != 104) throw Error("four-rooms map must have 104 open cells, found " + std::to_string(gw.num_states()));
    if (gw.hallways().size() != 4) throw Error("four-rooms map must have 4 hallways");
  }
  return gw;
}

GridWorld load_map_file(const std::string& path, bool strict_four_rooms) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open map file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_map(buf.str(), strict_four_rooms);
}

std::string_view four_rooms_text() { return kFourRooms; }

GridWorld four_rooms() { return load_map(kFourRooms, true); }

RewardFunction RewardFunction::goal_reward(const GridWorld& gw, State goal, double goal_value, double step_value) {
  if (!gw.valid(goal)) throw Error("goal state out of range");
  RewardFunction r;
  r.on_enter = Eigen::VectorXd::Constant(gw.num_states(), step_value);
  r.on_enter[goal] = goal_value;
  r.absorbing.assign(static_cast<std::size_t>(gw.num_states()), false);
  r.absorbing[static_cast<std::size_t>(goal)] = true;
  return r;
}

RewardFunction RewardFunction::state_reward(const Eigen::VectorXd& rewards) {
  RewardFunction r;
  r.on_enter = rewards;
  r.absorbing.assign(static_cast<std::size_t>(rewards.size()), false);
  return r;
}

namespace {

// One synchronous Bellman backup.
Eigen::MatrixXd backup(const GridWorld& gw, const RewardFunction& reward, const Eigen::MatrixXd& q, double discount) {
  const int n = gw.num_states();
  Eigen::VectorXd v(n);
  for (State s = 0; s < n; ++s) v[s] = reward.terminal(s) ? 0.0 : q.row(s).maxCoeff();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, kNumActions);
  for (State s = 0; s < n; ++s) {
    if (reward.terminal(s)) continue;
    for (Action a : kActions) {
      const State next = gw.step(s, a);
      out(s, to_index(a)) = reward(s, a, next) + discount * v[next];
    }
  }
  return out;
}

}  // namespace

double bellman_residual(const GridWorld& gw, const RewardFunction& reward, const QTable& q) {
  return (backup(gw, reward, q.values, q.discount) - q.values).cwiseAbs().maxCoeff();
}

QTable value_iteration(const GridWorld& gw, const RewardFunction& reward, double discount, double tol) {
  if (!(discount >= 0.0 && discount < 1.0)) throw Error("discount must lie in [0, 1)");
  if (!(tol > 0.0)) throw Error("tolerance must be positive");
  const int cap =
      discount > 0.0 ? std::max(10, 10 * static_cast<int>(std::ceil(std::log(tol) / std::log(discount)))) : 10;
  QTable q(gw.num_states(), discount);
  for (int it = 0; it < cap; ++it) {
    Eigen::MatrixXd next = backup(gw, reward, q.values, discount);
    const double delta = (next - q.values).cwiseAbs().maxCoeff();
    q.values = std::move(next);
    // residual(next) <= discount * delta
    if (discount * delta <= tol) return q;
  }
  throw Error("value iteration did not converge within " + std::to_string(cap) + " sweeps");
}

Eigen::MatrixXd boltzmann_policy(const QTable& q, double tau) {
  if (!(tau > 0.0)) throw Error("Boltzmann temperature must be positive");
  return log_boltzmann(q.values, tau).array().exp().matrix();
}

Action greedy_action(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = a;
  return action_from_index(static_cast<int>(best));
}

std::vector<Action> greedy_policy(const QTable& q) {
  std::vector<Action> out;
  out.reserve(static_cast<std::size_t>(q.values.rows()));
  for (Eigen::Index s = 0; s < q.values.rows(); ++s) out.push_back(greedy_action(q.values.row(s)));
  return out;
}

std::vector<int> bfs_distances(const GridWorld& gw, State target) {
  std::vector<int> dist(static_cast<std::size_t>(gw.num_states()), -1);
  std::deque<State> frontier{target};
  dist[static_cast<std::size_t>(target)] = 0;
  while (!frontier.empty()) {
    const State s = frontier.front();
    frontier.pop_front();
    // Moves are reversible, so distances *to* target equal distances from it.
    for (State n : gw.neighbors(s)) {
      if (dist[static_cast<std::size_t>(n)] >= 0) continue;
      dist[static_cast<std::size_t>(n)] = dist[static_cast<std::size_t>(s)] + 1;
      frontier.push_back(n);
    }
  }
  return dist;
}

std::vector<State> rollout(const GridWorld& gw, const std::vector<Action>& policy, State start, State goal,
                           int max_steps) {
  std::vector<State> path{start};
  State s = start;
  for (int t = 0; t < max_steps && s != goal; ++t) {
    s = gw.step(s, policy[static_cast<std::size_t>(s)]);
    path.push_back(s);
  }
  return path;
}

std::vector<State> hallway_zone(const GridWorld& gw, State hallway) {
  if (!gw.is_hallway(hallway)) throw Error("state is not a hallway");
  std::vector<State> zone{hallway};
  for (State n : gw.neighbors(hallway)) zone.push_back(n);
  return zone;
}

std::vector<State> hallway_zone_states(const GridWorld& gw) {
  std::vector<State> out;
  for (State h : gw.hallways())
    for (State s : hallway_zone(gw, h)) out.push_back(s);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> room_labels(const GridWorld& gw) {
  std::vector<int> label(static_cast<std::size_t>(gw.num_states()), -2);
  for (State h : gw.hallways()) label[static_cast<std::size_t>(h)] = -1;
  int next = 0;
  for (State s = 0; s < gw.num_states(); ++s) {
    if (label[static_cast<std::size_t>(s)] != -2) continue;
    std::deque<State> frontier{s};
    label[static_cast<std::size_t>(s)] = next;
    while (!frontier.empty()) {
      const State u = frontier.front();
      frontier.pop_front();
      for (State n : gw.neighbors(u)) {
        if (label[static_cast<std::size_t>(n)] != -2) continue;
        label[static_cast<std::size_t>(n)] = next;
        frontier.push_back(n);
      }
    }
    ++next;
  }
  return label;
}

}  // namespace optlearn
