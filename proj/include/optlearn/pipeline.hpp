#pragma once

#include "optlearn/demo.hpp"
#include "optlearn/gridworld.hpp"
#include "optlearn/options.hpp"
#include "optlearn/segmenter.hpp"
#include "optlearn/smdp.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace optlearn {

inline constexpr const char* kToolName = "optlearn";
inline constexpr const char* kToolVersion = "0.1.0";

/// Every knob of the pipeline. Serialised as a flat JSON object whose keys
/// are the field names below.
struct PipelineConfig {
  std::string map_path;  // empty: built-in four-rooms map
  int num_demos = 500;
  std::uint64_t seed = 1;
  int demo_episodes = 5000;

  SegmenterConfig segmenter;

  double nu = 0.1;
  double kernel_gamma = 0.5;
  double threshold_frac = 0.02;
  ThresholdDenominator threshold_denominator = ThresholdDenominator::Segments;
  bool prune_nonterminating = true;

  SmdpParams smdp;
  int runs = 25;
  Coord goal1{7, 9};
  Coord goal2{9, 9};

  std::string output_dir = "out";

  /// Throws on out-of-range values or a missing map file.
  void validate() const;
};

using ordered_json = nlohmann::ordered_json;

ordered_json to_json(const PipelineConfig& config);
/// Unknown keys are rejected; missing keys keep their defaults.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});
PipelineConfig load_config(const std::string& path, PipelineConfig base = {});

/// The config without output_dir, which does not affect results.
ordered_json result_config_json(const PipelineConfig& config);

/// FNV-1a over the compact result config JSON, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

/// {tool, version, config_hash, seed}
ordered_json artifact_meta(const PipelineConfig& config);

GridWorld load_world(const PipelineConfig& config);

// Artifacts -----------------------------------------------------------------

struct SegmentationArtifact {
  std::vector<Skill> skills;                 // values and policies rebuilt from weights
  std::map<int, std::vector<Segment>> segments;  // by skill id; steps are not stored
  std::vector<std::vector<int>> labels;      // skill id per step, per trajectory
  double joint_log_likelihood = 0.0;
};

ordered_json segmentation_to_json(const PipelineConfig& config, const SegmentationState& state,
                                  const std::vector<Trajectory>& demos, const SamplerTrace& trace);
SegmentationArtifact segmentation_from_json(const nlohmann::json& j, const GridWorld& gw,
                                            const SegmenterConfig& config);

ordered_json options_to_json(const PipelineConfig& config, const std::vector<Option>& options);
std::vector<Option> options_from_json(const nlohmann::json& j, const GridWorld& gw);

/// One option per skill with at least one surviving segment, in skill-id order.
std::vector<Option> learned_options(const GridWorld& gw, const SegmentationArtifact& seg, const PipelineConfig& config);

// Subcommands ---------------------------------------------------------------

void cmd_gen_demos(const PipelineConfig& config, const std::string& out_path);
void cmd_segment(const PipelineConfig& config, const std::string& trajectories_path, const std::string& out_path);
void cmd_build_options(const PipelineConfig& config, const std::string& segmentation_path,
                       const std::string& out_path, bool handcrafted);
void cmd_evaluate(const PipelineConfig& config, const std::string& options_path, const std::string& out_path);

/// All stages into config.output_dir: trajectories.jsonl, segmentation.json,
/// options.json, curves.csv.
void run_pipeline(const PipelineConfig& config);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace optlearn
