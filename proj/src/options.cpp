#include "optlearn/options.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace optlearn {

namespace {

std::vector<State> flagged(const std::vector<std::uint8_t>& mask) {
  std::vector<State> out;
  for (std::size_t s = 0; s < mask.size(); ++s)
    if (mask[s]) out.push_back(static_cast<State>(s));
  return out;
}

std::vector<Point2> points_of(const GridWorld& gw, const std::vector<State>& states) {
  std::vector<Point2> out;
  out.reserve(states.size());
  for (State s : states) out.push_back(state_point(gw, s));
  return out;
}

std::string join(const std::vector<State>& states) {
  std::ostringstream out;
  for (std::size_t i = 0; i < states.size(); ++i) out << (i ? ", " : "") << states[i];
  return out.str();
}

}  // namespace

std::string to_string(OptionSource source) { return source == OptionSource::Learned ? "learned" : "handcrafted"; }

std::vector<State> Option::initiation_states() const { return flagged(initiation); }
std::vector<State> Option::termination_states() const { return flagged(termination); }

std::vector<State> Option::domain() const {
  std::vector<State> out;
  for (std::size_t s = 0; s < policy.size(); ++s)
    if (policy[s] >= 0) out.push_back(static_cast<State>(s));
  return out;
}

std::string check_option(const GridWorld& gw, const Option& option, int max_steps) {
  const auto n = static_cast<std::size_t>(gw.num_states());
  if (option.initiation.size() != n || option.termination.size() != n || option.policy.size() != n)
    return "per-state arrays do not match the grid";
  const auto init = option.initiation_states();
  if (init.empty()) return "empty initiation set";
  bool does_work = false;
  for (State s : init) {
    if (!option.in_domain(s)) return "initiation state " + std::to_string(s) + " outside the policy domain";
    if (!option.terminates(s)) does_work = true;
    State cur = s;
    int k = 0;
    do {
      if (!option.in_domain(cur))
        return "rollout from " + std::to_string(s) + " leaves the policy domain at " + std::to_string(cur);
      cur = gw.step(cur, option.action(cur));
      ++k;
    } while (!option.terminates(cur) && k < max_steps);
    if (!option.terminates(cur))
      return "rollout from " + std::to_string(s) + " does not terminate within " + std::to_string(max_steps) + " steps";
  }
  if (!does_work) return "initiation set lies inside the termination set";
  return {};
}

std::vector<Segment> threshold_segments(const std::vector<Segment>& segments, double frac,
                                        ThresholdDenominator denominator) {
  if (!(frac > 0.0 && frac < 1.0)) throw Error("threshold fraction must lie in (0, 1)");
  if (segments.empty()) throw Error("no segments to threshold");
  std::map<State, int> counts;
  double total = 0.0;
  for (const auto& seg : segments) {
    ++counts[seg.end_state];
    total += denominator == ThresholdDenominator::Segments ? 1.0 : static_cast<double>(seg.steps.size() + 1);
  }
  std::vector<Segment> kept;
  for (const auto& seg : segments)
    if (static_cast<double>(counts[seg.end_state]) >= frac * total) kept.push_back(seg);
  if (kept.empty()) throw SkillDegenerate(segments.front().skill_id, "every segment fell below the end-state threshold");
  return kept;
}

Option build_option(const GridWorld& gw, const Skill& skill, const std::vector<State>& start_states,
                    const std::vector<State>& end_states, const OptionBuildParams& params, int option_id) {
  if (start_states.empty() || end_states.empty()) throw SkillDegenerate(skill.id, "no start or end states");
  const auto n = static_cast<std::size_t>(gw.num_states());
  Option option;
  option.id = option_id;
  option.source = OptionSource::Learned;
  option.skill_id = skill.id;
  option.initiation.assign(n, 0);
  option.termination.assign(n, 0);
  option.policy.assign(n, -1);

  option.initiation_model =
      fit_ocsvm(points_of(gw, start_states), params.nu, params.kernel_gamma, params.ocsvm_tol).model;
  option.termination_model =
      fit_ocsvm(points_of(gw, end_states), params.nu, params.kernel_gamma, params.ocsvm_tol).model;
  for (State s : classify_states(*option.initiation_model, gw)) option.initiation[static_cast<std::size_t>(s)] = 1;
  for (State s : classify_states(*option.termination_model, gw)) option.termination[static_cast<std::size_t>(s)] = 1;
  if (option.initiation_states().empty()) throw SkillDegenerate(skill.id, "empty initiation set");
  if (option.termination_states().empty()) throw SkillDegenerate(skill.id, "empty termination set");

  const auto greedy = greedy_policy(skill.q);
  std::vector<State> failed;
  for (State s : option.initiation_states()) {
    std::vector<State> visited;
    State cur = s;
    int k = 0;
    do {
      visited.push_back(cur);
      cur = gw.step(cur, greedy[static_cast<std::size_t>(cur)]);
      ++k;
    } while (!option.terminates(cur) && k < params.max_steps);
    if (!option.terminates(cur)) {
      failed.push_back(s);
      continue;
    }
    for (State v : visited) option.policy[static_cast<std::size_t>(v)] = to_index(greedy[static_cast<std::size_t>(v)]);
  }
  if (!failed.empty()) {
    if (!params.prune_nonterminating)
      throw SkillDegenerate(skill.id, "rollouts do not terminate from states " + join(failed));
    for (State s : failed) option.initiation[static_cast<std::size_t>(s)] = 0;
    if (option.initiation_states().empty())
      throw SkillDegenerate(skill.id, "no initiation state reaches the termination set");
  }
  // Policy entries from pruned rollouts were never written, so the domain is
  // exactly the union of terminating rollouts.
  if (const auto problem = check_option(gw, option, params.max_steps); !problem.empty())
    throw SkillDegenerate(skill.id, problem);
  return option;
}

std::vector<Option> handcrafted_options(const GridWorld& gw) {
  const auto labels = room_labels(gw);
  const int rooms = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  if (gw.num_states() != 104 || gw.hallways().size() != 4 || rooms != 4)
    throw Error("handcrafted options need the four-rooms map");
  const double centre_row = (gw.height() - 1) / 2.0;
  const double centre_col = (gw.width() - 1) / 2.0;
  auto angle = [&](double row, double col) { return std::atan2(row - centre_row, col - centre_col); };

  std::vector<Option> out;
  const auto n = static_cast<std::size_t>(gw.num_states());
  for (int room = 0; room < rooms; ++room) {
    std::vector<State> members;
    double sum_row = 0.0;
    double sum_col = 0.0;
    for (State s = 0; s < gw.num_states(); ++s) {
      if (labels[static_cast<std::size_t>(s)] != room) continue;
      members.push_back(s);
      sum_row += gw.coord(s).row;
      sum_col += gw.coord(s).col;
    }
    const double room_angle = angle(sum_row / members.size(), sum_col / members.size());
    State clockwise = -1;
    State anticlockwise = -1;
    for (State h : gw.hallways()) {
      bool adjacent = false;
      for (State nb : gw.neighbors(h)) adjacent = adjacent || labels[static_cast<std::size_t>(nb)] == room;
      if (!adjacent) continue;
      // Rows grow downward, so increasing angle is clockwise on screen.
      double d = angle(gw.coord(h).row, gw.coord(h).col) - room_angle;
      while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
      while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
      (d > 0.0 ? clockwise : anticlockwise) = h;
    }
    if (clockwise < 0 || anticlockwise < 0) throw Error("room " + std::to_string(room) + " lacks two hallways");

    for (State target : {clockwise, anticlockwise}) {
      const auto dist = bfs_distances(gw, target);
      Option option;
      option.id = static_cast<int>(out.size());
      option.source = OptionSource::Handcrafted;
      option.initiation.assign(n, 0);
      option.termination.assign(n, 0);
      option.policy.assign(n, -1);
      option.termination[static_cast<std::size_t>(target)] = 1;
      for (State s : members) {
        option.initiation[static_cast<std::size_t>(s)] = 1;
        for (Action a : kActions) {
          const State next = gw.step(s, a);
          if (dist[static_cast<std::size_t>(next)] == dist[static_cast<std::size_t>(s)] - 1) {
            option.policy[static_cast<std::size_t>(s)] = to_index(a);
            break;
          }
        }
      }
      out.push_back(std::move(option));
    }
  }
  return out;
}

}  // namespace optlearn
