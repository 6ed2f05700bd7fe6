// Command-line front end: gen-demos, segment, build-options, evaluate, run.

#include "optlearn/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <string_view>

using namespace optlearn;

namespace {

// --config must be applied before the other flags so that flags override it.
std::string find_config_path(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string_view arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return std::string(arg.substr(9));
  }
  return {};
}

void add_config_flags(CLI::App& app, PipelineConfig& c, std::string& config_path, std::string& denominator,
                      std::vector<int>& goal1, std::vector<int>& goal2) {
  app.add_option("--config", config_path, "Flat JSON config; other flags override it");
  app.add_option("--map", c.map_path, "ASCII map file (default: built-in four rooms)");
  app.add_option("--num-demos", c.num_demos, "Number of demonstrations");
  app.add_option("--seed", c.seed, "Root seed");
  app.add_option("--demo-episodes", c.demo_episodes, "Q-learning episodes per demo goal");
  app.add_option("--bp-mass", c.segmenter.bp_mass, "Beta-process mass");
  app.add_option("--dir-gamma", c.segmenter.dir_gamma, "Dirichlet concentration on transitions");
  app.add_option("--sticky-kappa", c.segmenter.sticky_kappa, "Extra self-transition mass");
  app.add_option("--tau", c.segmenter.tau, "Boltzmann temperature of skill policies");
  app.add_option("--sweeps", c.segmenter.sweeps, "Sampler sweeps");
  app.add_option("--time-budget", c.segmenter.time_budget_seconds, "Sampler wall-clock limit in seconds (0: none)");
  app.add_option("--refit-every", c.segmenter.refit_every, "Sweeps between reward refits");
  app.add_option("--moves-per-sweep", c.segmenter.moves_per_sweep, "Birth/death proposals per sweep");
  app.add_option("--split-merge-moves", c.segmenter.split_merge_moves, "Split and merge proposals per sweep");
  app.add_option("--consolidate", c.segmenter.consolidate, "Greedy merges after sampling (true/false)");
  app.add_option("--birth-min-window", c.segmenter.birth_min_window, "Shortest birth window");
  app.add_option("--birth-max-window", c.segmenter.birth_max_window, "Longest birth window");
  app.add_option("--skill-discount", c.segmenter.skill_discount, "Discount for skill value iteration");
  app.add_option("--irl-learning-rate", c.segmenter.irl.learning_rate, "IRL gradient step");
  app.add_option("--irl-iterations", c.segmenter.irl.iterations, "IRL iteration cap");
  app.add_option("--irl-tolerance", c.segmenter.irl.tolerance, "IRL gradient tolerance");
  app.add_option("--nu", c.nu, "One-class SVM nu");
  app.add_option("--kernel-gamma", c.kernel_gamma, "RBF kernel gamma");
  app.add_option("--threshold-frac", c.threshold_frac, "End-state frequency threshold");
  app.add_option("--threshold-denominator", denominator, "segments or occurrences")
      ->check(CLI::IsMember({"segments", "occurrences"}));
  app.add_option("--prune-nonterminating", c.prune_nonterminating,
                 "Drop initiation states whose rollout never terminates (false: fail)");
  app.add_option("--alpha", c.smdp.alpha, "SMDP learning rate");
  app.add_option("--epsilon", c.smdp.epsilon, "SMDP exploration rate");
  app.add_option("--discount", c.smdp.discount, "SMDP discount");
  app.add_option("--episodes", c.smdp.episodes, "Episodes per evaluation run");
  app.add_option("--runs", c.runs, "Runs per goal and condition");
  app.add_option("--goal1", goal1, "Row and column of G1")->expected(2);
  app.add_option("--goal2", goal2, "Row and column of G2")->expected(2);
  app.add_option("--output-dir", c.output_dir, "Directory for artifacts");
}

std::string in_output_dir(const PipelineConfig& c, const char* name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
  PipelineConfig config;
  try {
    if (const auto path = find_config_path(argc, argv); !path.empty()) config = load_config(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  CLI::App app{"Discover options from demonstrations in a grid world"};
  app.require_subcommand(1);
  std::string config_path;
  std::string denominator = config.threshold_denominator == ThresholdDenominator::Segments ? "segments" : "occurrences";
  std::vector<int> goal1{config.goal1.row, config.goal1.col};
  std::vector<int> goal2{config.goal2.row, config.goal2.col};

  std::string out_path;
  std::string in_path;
  bool handcrafted = false;

  auto* gen = app.add_subcommand("gen-demos", "Generate demonstration trajectories (JSONL)");
  gen->add_option("--out", out_path, "Output file (default: <output-dir>/trajectories.jsonl)");
  auto* seg = app.add_subcommand("segment", "Segment demonstrations into skills");
  seg->add_option("--demos", in_path, "Trajectories file (default: <output-dir>/trajectories.jsonl)");
  seg->add_option("--out", out_path, "Output file (default: <output-dir>/segmentation.json)");
  auto* build = app.add_subcommand("build-options", "Build options from a segmentation");
  build->add_option("--segmentation", in_path, "Segmentation file (default: <output-dir>/segmentation.json)");
  build->add_option("--out", out_path, "Output file (default: <output-dir>/options.json)");
  build->add_flag("--handcrafted", handcrafted, "Write the eight handcrafted room options instead");
  auto* eval = app.add_subcommand("evaluate", "Compare SMDP Q-learning with and without options");
  eval->add_option("--options", in_path, "Options file (default: <output-dir>/options.json)");
  eval->add_option("--out", out_path, "Output file (default: <output-dir>/curves.csv)");
  auto* run = app.add_subcommand("run", "Run every stage into the output directory");
  for (auto* sub : {gen, seg, build, eval, run}) add_config_flags(*sub, config, config_path, denominator, goal1, goal2);

  CLI11_PARSE(app, argc, argv);

  try {
    config = config_from_json({{"threshold_denominator", denominator}, {"goal1", goal1}, {"goal2", goal2}}, config);
    auto pick = [&](const std::string& given, const char* name) { return given.empty() ? in_output_dir(config, name) : given; };
    if (gen->parsed()) {
      cmd_gen_demos(config, pick(out_path, "trajectories.jsonl"));
    } else if (seg->parsed()) {
      cmd_segment(config, pick(in_path, "trajectories.jsonl"), pick(out_path, "segmentation.json"));
    } else if (build->parsed()) {
      cmd_build_options(config, pick(in_path, "segmentation.json"), pick(out_path, "options.json"), handcrafted);
    } else if (eval->parsed()) {
      cmd_evaluate(config, pick(in_path, "options.json"), pick(out_path, "curves.csv"));
    } else if (run->parsed()) {
      run_pipeline(config);
    }
  } catch (const SkillDegenerate& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
