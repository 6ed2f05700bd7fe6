#include "doctest.h"

#include "optlearn/options.hpp"

#include <algorithm>

using namespace optlearn;

namespace {

Skill peak_skill(const GridWorld& gw, int id, State peak) {
  RewardWeights w;
  w.theta = Eigen::VectorXd::Constant(gw.num_states(), -0.1);
  w.theta[peak] = 5.0;
  return make_skill(gw, id, w, SegmenterConfig{});
}

Segment segment_ending(State end, int len) {
  Segment s;
  s.end_state = end;
  s.steps.assign(static_cast<std::size_t>(len), Step{});
  return s;
}

std::vector<State> room_cells(const GridWorld& gw, int r0, int r1, int c0, int c1) {
  std::vector<State> out;
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) out.push_back(gw.state(r, c));
  return out;
}

}  // namespace

TEST_SUITE("options") {

TEST_CASE("handcrafted options lead to each room's two hallways") {
  const auto gw = four_rooms();
  const auto opts = handcrafted_options(gw);
  REQUIRE(opts.size() == 8);
  // Top-left room: clockwise is the hallway to the top-right room.
  CHECK(opts[0].termination_states() == std::vector<State>{gw.state(3, 6)});
  CHECK(opts[1].termination_states() == std::vector<State>{gw.state(6, 2)});
  CHECK(opts[0].initiation_states() == room_cells(gw, 1, 5, 1, 5));
  for (const auto& o : opts) {
    CHECK(o.source == OptionSource::Handcrafted);
    CHECK(o.skill_id == -1);
    CHECK(check_option(gw, o).empty());
    const State target = o.termination_states().front();
    const auto dist = bfs_distances(gw, target);
    for (State s : o.initiation_states()) {
      State cur = s;
      int k = 0;
      while (cur != target) {
        cur = gw.step(cur, o.action(cur));
        ++k;
      }
      CHECK(k == dist[static_cast<std::size_t>(s)]);
    }
  }
  std::vector<State> targets;
  for (const auto& o : opts) targets.push_back(o.termination_states().front());
  std::sort(targets.begin(), targets.end());
  CHECK(std::adjacent_find(targets.begin(), targets.end()) != targets.end());  // each hallway serves two rooms
  CHECK_THROWS_AS(handcrafted_options(load_map("####\n#..#\n####\n")), Error);
}

TEST_CASE("check_option reports malformed options") {
  const auto gw = four_rooms();
  auto o = handcrafted_options(gw)[0];
  CHECK(check_option(gw, o).empty());
  auto empty = o;
  std::fill(empty.initiation.begin(), empty.initiation.end(), 0);
  CHECK(check_option(gw, empty) == "empty initiation set");
  auto holed = o;
  holed.policy[static_cast<std::size_t>(gw.state(3, 5))] = -1;
  CHECK_FALSE(check_option(gw, holed).empty());
  auto trivial = o;
  std::fill(trivial.initiation.begin(), trivial.initiation.end(), 0);
  trivial.initiation[static_cast<std::size_t>(gw.state(3, 6))] = 1;
  trivial.policy[static_cast<std::size_t>(gw.state(3, 6))] = to_index(Action::Up);
  CHECK(check_option(gw, trivial) == "initiation set lies inside the termination set");
  auto short_arrays = o;
  short_arrays.policy.pop_back();
  CHECK_FALSE(check_option(gw, short_arrays).empty());
}

TEST_CASE("end-state thresholding") {
  std::vector<Segment> segs;
  for (int i = 0; i < 98; ++i) segs.push_back(segment_ending(5, 3));
  segs.push_back(segment_ending(7, 3));
  segs.push_back(segment_ending(9, 3));
  const auto kept = threshold_segments(segs, 0.02);
  CHECK(kept.size() == 98);
  CHECK(std::all_of(kept.begin(), kept.end(), [](const Segment& s) { return s.end_state == 5; }));
  // 400 visited states: 2% is 8, still dropping the singletons.
  CHECK(threshold_segments(segs, 0.02, ThresholdDenominator::Occurrences).size() == 98);
  CHECK(threshold_segments(segs, 0.01).size() == 100);

  const std::vector<Segment> spread = {segment_ending(1, 1), segment_ending(2, 1), segment_ending(3, 1)};
  CHECK_THROWS_AS(threshold_segments(spread, 0.5), SkillDegenerate);
  CHECK_THROWS_AS(threshold_segments({}, 0.02), Error);
  CHECK_THROWS_AS(threshold_segments(segs, 0.0), Error);
}

TEST_CASE("options built from a hallway-seeking skill") {
  const auto gw = four_rooms();
  const auto skill = peak_skill(gw, 3, gw.state(3, 6));
  const std::vector<State> starts = {gw.state(1, 1), gw.state(2, 2), gw.state(4, 2), gw.state(2, 4), gw.state(5, 5)};
  const std::vector<State> ends = {gw.state(3, 5), gw.state(3, 6), gw.state(3, 7)};
  const auto o = build_option(gw, skill, starts, ends, {}, 2);
  CHECK(o.id == 2);
  CHECK(o.skill_id == 3);
  CHECK(o.source == OptionSource::Learned);
  CHECK(o.termination_states() == ends);
  CHECK(check_option(gw, o).empty());
  REQUIRE(o.initiation_model.has_value());
  REQUIRE(o.termination_model.has_value());
  for (State s : starts) CHECK(o.can_initiate(s));
  // The domain is exactly what rollouts from the initiation set visit.
  std::vector<State> visited;
  const auto greedy = greedy_policy(skill.q);
  for (State s : o.initiation_states()) {
    State cur = s;
    do {
      visited.push_back(cur);
      cur = gw.step(cur, greedy[static_cast<std::size_t>(cur)]);
    } while (!o.terminates(cur));
  }
  std::sort(visited.begin(), visited.end());
  visited.erase(std::unique(visited.begin(), visited.end()), visited.end());
  CHECK(o.domain() == visited);
}

TEST_CASE("skills that never reach their end states are degenerate") {
  const auto gw = four_rooms();
  const auto away = peak_skill(gw, 1, gw.state(11, 1));
  const std::vector<State> starts = {gw.state(1, 1), gw.state(2, 2)};
  const std::vector<State> ends = {gw.state(1, 11), gw.state(2, 11)};
  OptionBuildParams strict;
  strict.prune_nonterminating = false;
  CHECK_THROWS_AS(build_option(gw, away, starts, ends, strict), SkillDegenerate);
  CHECK_THROWS_AS(build_option(gw, away, starts, ends), SkillDegenerate);
  CHECK_THROWS_AS(build_option(gw, away, {}, ends), SkillDegenerate);
}

TEST_CASE("option source names") {
  CHECK(to_string(OptionSource::Learned) == "learned");
  CHECK(to_string(OptionSource::Handcrafted) == "handcrafted");
}

}  // TEST_SUITE
