#pragma once

#include "optlearn/gridworld.hpp"
#include "optlearn/ocsvm.hpp"
#include "optlearn/segmenter.hpp"

#include <optional>
#include <string>
#include <vector>

namespace optlearn {

enum class OptionSource { Learned, Handcrafted };

std::string to_string(OptionSource source);

inline constexpr int kMaxOptionSteps = 200;

/// (I, pi, beta) over a grid. Per-state arrays are indexed by state; `policy`
/// holds -1 outside the option's domain. beta is 1 on the termination set.
struct Option {
  int id = 0;
  OptionSource source = OptionSource::Learned;
  int skill_id = -1;  // -1 for handcrafted options
  std::vector<std::uint8_t> initiation;
  std::vector<std::uint8_t> termination;
  std::vector<int> policy;
  std::optional<OcSvmModel> initiation_model;
  std::optional<OcSvmModel> termination_model;

  bool can_initiate(State s) const { return initiation[static_cast<std::size_t>(s)] != 0; }
  bool terminates(State s) const { return termination[static_cast<std::size_t>(s)] != 0; }
  bool in_domain(State s) const { return policy[static_cast<std::size_t>(s)] >= 0; }
  Action action(State s) const { return action_from_index(policy[static_cast<std::size_t>(s)]); }

  std::vector<State> initiation_states() const;
  std::vector<State> termination_states() const;
  std::vector<State> domain() const;
};

/// Empty when the option is well formed: every initiation state reaches the
/// termination set within `max_steps` through states in the policy domain,
/// and the initiation set is not contained in the termination set.
std::string check_option(const GridWorld& gw, const Option& option, int max_steps = kMaxOptionSteps);

class SkillDegenerate : public Error {
 public:
  SkillDegenerate(int skill_id, const std::string& what)
      : Error("skill " + std::to_string(skill_id) + " degenerate: " + what), skill_id(skill_id) {}
  int skill_id;
};

enum class ThresholdDenominator { Segments, Occurrences };

/// Drops segments whose end state occurs fewer than frac * denominator times,
/// where the denominator is the segment count or the number of visited states.
std::vector<Segment> threshold_segments(const std::vector<Segment>& segments, double frac,
                                        ThresholdDenominator denominator = ThresholdDenominator::Segments);

struct OptionBuildParams {
  double nu = 0.1;
  double kernel_gamma = 0.5;
  double ocsvm_tol = 1e-10;
  int max_steps = kMaxOptionSteps;
  /// Drop initiation states whose rollout does not terminate instead of failing.
  bool prune_nonterminating = true;
};

/// Fits one-class SVMs on the start and end states, then restricts the
/// skill's greedy policy to the states its rollouts from the initiation set visit.
Option build_option(const GridWorld& gw, const Skill& skill, const std::vector<State>& start_states,
                    const std::vector<State>& end_states, const OptionBuildParams& params = {}, int option_id = 0);

/// Two options per room: shortest paths to the clockwise and anticlockwise
/// hallway, initiable anywhere in the room. Clockwise comes first.
std::vector<Option> handcrafted_options(const GridWorld& gw);

}  // namespace optlearn
