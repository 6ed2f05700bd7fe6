#include "optlearn/pipeline.hpp"

#include "optlearn/random.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace optlearn {

namespace {

std::string denominator_name(ThresholdDenominator d) {
  return d == ThresholdDenominator::Segments ? "segments" : "occurrences";
}

ThresholdDenominator denominator_from(const std::string& name) {
  if (name == "segments") return ThresholdDenominator::Segments;
  if (name == "occurrences") return ThresholdDenominator::Occurrences;
  throw Error("threshold_denominator must be \"segments\" or \"occurrences\", got \"" + name + "\"");
}

ordered_json model_to_json(const std::optional<OcSvmModel>& model) {
  if (!model) return nullptr;
  ordered_json j;
  auto points = ordered_json::array();
  for (const auto& p : model->support_points) points.push_back({p.x(), p.y()});
  j["support_points"] = std::move(points);
  j["alphas"] = std::vector<double>(model->alphas.data(), model->alphas.data() + model->alphas.size());
  j["rho"] = model->rho;
  j["nu"] = model->nu;
  j["kernel_gamma"] = model->kernel_gamma;
  j["num_training"] = model->num_training;
  return j;
}

std::optional<OcSvmModel> model_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  OcSvmModel m;
  for (const auto& p : j.at("support_points")) m.support_points.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  const auto alphas = j.at("alphas").get<std::vector<double>>();
  m.alphas = Eigen::Map<const Eigen::VectorXd>(alphas.data(), static_cast<Eigen::Index>(alphas.size()));
  m.rho = j.at("rho").get<double>();
  m.nu = j.at("nu").get<double>();
  m.kernel_gamma = j.at("kernel_gamma").get<double>();
  m.num_training = j.at("num_training").get<int>();
  return m;
}

std::string parent_of(const std::string& path) { return std::filesystem::path(path).parent_path().string(); }

void ensure_parent(const std::string& path) {
  const auto dir = parent_of(path);
  if (!dir.empty()) std::filesystem::create_directories(dir);
}

}  // namespace

void PipelineConfig::validate() const {
  if (!map_path.empty() && !std::filesystem::exists(map_path)) throw Error("map file not found: " + map_path);
  if (num_demos < 1) throw Error("num_demos must be at least 1");
  if (demo_episodes < 1) throw Error("demo_episodes must be at least 1");
  if (segmenter.sweeps < 0) throw Error("sweeps must be non-negative");
  if (!(segmenter.tau > 0.0)) throw Error("tau must be positive");
  if (!(segmenter.bp_mass > 0.0)) throw Error("bp_mass must be positive");
  if (!(segmenter.dir_gamma > 0.0)) throw Error("dir_gamma must be positive");
  if (segmenter.sticky_kappa < 0.0) throw Error("sticky_kappa must be non-negative");
  if (segmenter.birth_min_window < 1 || segmenter.birth_max_window < segmenter.birth_min_window)
    throw Error("birth window bounds must satisfy 1 <= min <= max");
  if (!(nu > 0.0 && nu < 1.0)) throw Error("nu must lie in (0, 1)");
  if (!(kernel_gamma > 0.0)) throw Error("kernel_gamma must be positive");
  if (!(threshold_frac > 0.0 && threshold_frac < 1.0)) throw Error("threshold_frac must lie in (0, 1)");
  if (smdp.episodes < 1) throw Error("episodes must be at least 1");
  if (runs < 1) throw Error("runs must be at least 1");
}

ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["map_path"] = c.map_path;
  j["num_demos"] = c.num_demos;
  j["seed"] = c.seed;
  j["demo_episodes"] = c.demo_episodes;
  j["bp_mass"] = c.segmenter.bp_mass;
  j["dir_gamma"] = c.segmenter.dir_gamma;
  j["sticky_kappa"] = c.segmenter.sticky_kappa;
  j["tau"] = c.segmenter.tau;
  j["sweeps"] = c.segmenter.sweeps;
  j["time_budget_seconds"] = c.segmenter.time_budget_seconds;
  j["refit_every"] = c.segmenter.refit_every;
  j["moves_per_sweep"] = c.segmenter.moves_per_sweep;
  j["split_merge_moves"] = c.segmenter.split_merge_moves;
  j["consolidate"] = c.segmenter.consolidate;
  j["birth_min_window"] = c.segmenter.birth_min_window;
  j["birth_max_window"] = c.segmenter.birth_max_window;
  j["skill_discount"] = c.segmenter.skill_discount;
  j["irl_learning_rate"] = c.segmenter.irl.learning_rate;
  j["irl_iterations"] = c.segmenter.irl.iterations;
  j["irl_tolerance"] = c.segmenter.irl.tolerance;
  j["nu"] = c.nu;
  j["kernel_gamma"] = c.kernel_gamma;
  j["threshold_frac"] = c.threshold_frac;
  j["threshold_denominator"] = denominator_name(c.threshold_denominator);
  j["prune_nonterminating"] = c.prune_nonterminating;
  j["alpha"] = c.smdp.alpha;
  j["epsilon"] = c.smdp.epsilon;
  j["discount"] = c.smdp.discount;
  j["episodes"] = c.smdp.episodes;
  j["runs"] = c.runs;
  j["goal1"] = {c.goal1.row, c.goal1.col};
  j["goal2"] = {c.goal2.row, c.goal2.col};
  j["output_dir"] = c.output_dir;
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig c) {
  if (!j.is_object()) throw Error("config must be a JSON object");
  const auto known = to_json(c);
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw Error("unknown config key: " + key);
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception&) {
      throw Error(std::string("config key ") + key + " has the wrong type");
    }
  };
  get("map_path", c.map_path);
  get("num_demos", c.num_demos);
  get("seed", c.seed);
  get("demo_episodes", c.demo_episodes);
  get("bp_mass", c.segmenter.bp_mass);
  get("dir_gamma", c.segmenter.dir_gamma);
  get("sticky_kappa", c.segmenter.sticky_kappa);
  get("tau", c.segmenter.tau);
  get("sweeps", c.segmenter.sweeps);
  get("time_budget_seconds", c.segmenter.time_budget_seconds);
  get("refit_every", c.segmenter.refit_every);
  get("moves_per_sweep", c.segmenter.moves_per_sweep);
  get("split_merge_moves", c.segmenter.split_merge_moves);
  get("consolidate", c.segmenter.consolidate);
  get("birth_min_window", c.segmenter.birth_min_window);
  get("birth_max_window", c.segmenter.birth_max_window);
  get("skill_discount", c.segmenter.skill_discount);
  get("irl_learning_rate", c.segmenter.irl.learning_rate);
  get("irl_iterations", c.segmenter.irl.iterations);
  get("irl_tolerance", c.segmenter.irl.tolerance);
  get("nu", c.nu);
  get("kernel_gamma", c.kernel_gamma);
  get("threshold_frac", c.threshold_frac);
  if (j.contains("threshold_denominator"))
    c.threshold_denominator = denominator_from(j.at("threshold_denominator").get<std::string>());
  get("prune_nonterminating", c.prune_nonterminating);
  get("alpha", c.smdp.alpha);
  get("epsilon", c.smdp.epsilon);
  get("discount", c.smdp.discount);
  get("episodes", c.smdp.episodes);
  get("runs", c.runs);
  for (auto [key, goal] : {std::pair{"goal1", &c.goal1}, std::pair{"goal2", &c.goal2}}) {
    if (!j.contains(key)) continue;
    const auto& g = j.at(key);
    if (!g.is_array() || g.size() != 2) throw Error(std::string(key) + " must be [row, col]");
    *goal = {g.at(0).get<int>(), g.at(1).get<int>()};
  }
  get("output_dir", c.output_dir);
  return c;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
  return config_from_json(read_json_file(path), std::move(base));
}

ordered_json result_config_json(const PipelineConfig& config) {
  auto j = to_json(config);
  j.erase("output_dir");
  return j;
}

std::string config_hash(const PipelineConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : result_config_json(config).dump()) h = (h ^ ch) * 0x100000001b3ULL;
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

ordered_json artifact_meta(const PipelineConfig& config) {
  ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  return j;
}

GridWorld load_world(const PipelineConfig& config) {
  return config.map_path.empty() ? four_rooms() : load_map_file(config.map_path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("failed writing " + path);
}

// Segmentation ----------------------------------------------------------------

ordered_json segmentation_to_json(const PipelineConfig& config, const SegmentationState& state,
                                  const std::vector<Trajectory>& demos, const SamplerTrace& trace) {
  ordered_json j;
  j["meta"] = artifact_meta(config);
  j["config"] = result_config_json(config);
  j["num_skills"] = state.num_skills();
  j["joint_log_likelihood"] = state.joint_log_likelihood;
  j["best_sweep"] = trace.best_sweep;
  j["sweeps_run"] = trace.sweeps_run;
  const auto usage = state.usage();
  const auto segments = extract_segments(state, demos);
  auto skills = ordered_json::array();
  for (int k = 0; k < state.num_skills(); ++k) {
    const auto& skill = state.skills[static_cast<std::size_t>(k)];
    const auto& theta = skill.weights.theta;
    ordered_json s;
    s["id"] = skill.id;
    s["usage"] = usage[static_cast<std::size_t>(k)];
    const auto it = segments.find(skill.id);
    s["num_segments"] = it == segments.end() ? 0 : it->second.size();
    s["theta"] = std::vector<double>(theta.data(), theta.data() + theta.size());
    skills.push_back(std::move(s));
  }
  j["skills"] = std::move(skills);
  auto segs = ordered_json::array();
  for (const auto& [id, list] : segments) {
    for (const auto& seg : list) {
      ordered_json s;
      s["skill"] = id;
      s["trajectory"] = seg.trajectory_id;
      s["offset"] = seg.offset;
      s["start"] = seg.start_state;
      s["end"] = seg.end_state;
      auto steps = ordered_json::array();
      for (const auto& st : seg.steps) steps.push_back({st.state, to_index(st.action)});
      s["steps"] = std::move(steps);
      segs.push_back(std::move(s));
    }
  }
  j["segments"] = std::move(segs);
  auto features = ordered_json::array();
  for (Eigen::Index i = 0; i < state.features.rows(); ++i) {
    std::vector<int> row(static_cast<std::size_t>(state.features.cols()));
    for (Eigen::Index k = 0; k < state.features.cols(); ++k) row[static_cast<std::size_t>(k)] = state.features(i, k);
    features.push_back(std::move(row));
  }
  j["features"] = std::move(features);
  auto labels = ordered_json::array();
  for (const auto& z : state.z) labels.push_back(z);
  j["labels"] = std::move(labels);
  return j;
}

SegmentationArtifact segmentation_from_json(const nlohmann::json& j, const GridWorld& gw,
                                            const SegmenterConfig& config) {
  SegmentationArtifact out;
  try {
    for (const auto& s : j.at("skills")) {
      const auto theta = s.at("theta").get<std::vector<double>>();
      if (static_cast<int>(theta.size()) != gw.num_states()) throw Error("skill reward has the wrong length");
      RewardWeights w;
      w.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
      out.skills.push_back(make_skill(gw, s.at("id").get<int>(), std::move(w), config));
    }
    for (const auto& s : j.at("segments")) {
      Segment seg;
      seg.skill_id = s.at("skill").get<int>();
      seg.trajectory_id = s.at("trajectory").get<int>();
      seg.offset = s.at("offset").get<int>();
      seg.start_state = s.at("start").get<int>();
      seg.end_state = s.at("end").get<int>();
      for (const auto& st : s.at("steps")) seg.steps.push_back({st.at(0).get<int>(), action_from_index(st.at(1).get<int>())});
      if (!gw.valid(seg.start_state) || !gw.valid(seg.end_state)) throw Error("segment state out of range");
      out.segments[seg.skill_id].push_back(std::move(seg));
    }
    for (const auto& z : j.at("labels")) out.labels.push_back(z.get<std::vector<int>>());
    out.joint_log_likelihood = j.at("joint_log_likelihood").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed segmentation: ") + e.what());
  }
  return out;
}

// Options -------------------------------------------------------------------

ordered_json options_to_json(const PipelineConfig& config, const std::vector<Option>& options) {
  ordered_json j;
  j["meta"] = artifact_meta(config);
  auto list = ordered_json::array();
  for (const auto& o : options) {
    ordered_json e;
    e["id"] = o.id;
    e["source"] = to_string(o.source);
    e["skill_id"] = o.skill_id;
    e["initiation"] = o.initiation_states();
    e["termination"] = o.termination_states();
    ordered_json policy = ordered_json::object();
    for (State s : o.domain()) policy[std::to_string(s)] = o.policy[static_cast<std::size_t>(s)];
    e["policy"] = std::move(policy);
    e["initiation_model"] = model_to_json(o.initiation_model);
    e["termination_model"] = model_to_json(o.termination_model);
    list.push_back(std::move(e));
  }
  j["options"] = std::move(list);
  return j;
}

std::vector<Option> options_from_json(const nlohmann::json& j, const GridWorld& gw) {
  std::vector<Option> out;
  const auto n = static_cast<std::size_t>(gw.num_states());
  try {
    for (const auto& e : j.at("options")) {
      Option o;
      o.id = e.at("id").get<int>();
      const auto source = e.at("source").get<std::string>();
      if (source != "learned" && source != "handcrafted") throw Error("unknown option source " + source);
      o.source = source == "learned" ? OptionSource::Learned : OptionSource::Handcrafted;
      o.skill_id = e.at("skill_id").get<int>();
      o.initiation.assign(n, 0);
      o.termination.assign(n, 0);
      o.policy.assign(n, -1);
      auto state_of = [&](int s) {
        if (!gw.valid(s)) throw Error("option state out of range: " + std::to_string(s));
        return static_cast<std::size_t>(s);
      };
      for (int s : e.at("initiation").get<std::vector<int>>()) o.initiation[state_of(s)] = 1;
      for (int s : e.at("termination").get<std::vector<int>>()) o.termination[state_of(s)] = 1;
      for (const auto& [key, value] : e.at("policy").items()) {
        const int a = value.get<int>();
        action_from_index(a);
        o.policy[state_of(std::stoi(key))] = a;
      }
      o.initiation_model = model_from_json(e.at("initiation_model"));
      o.termination_model = model_from_json(e.at("termination_model"));
      if (const auto problem = check_option(gw, o); !problem.empty())
        throw Error("option " + std::to_string(o.id) + " is not well formed: " + problem);
      out.push_back(std::move(o));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed options: ") + e.what());
  }
  return out;
}

std::vector<Option> learned_options(const GridWorld& gw, const SegmentationArtifact& seg, const PipelineConfig& config) {
  OptionBuildParams params;
  params.nu = config.nu;
  params.kernel_gamma = config.kernel_gamma;
  params.prune_nonterminating = config.prune_nonterminating;
  std::vector<Option> out;
  for (const auto& skill : seg.skills) {
    const auto it = seg.segments.find(skill.id);
    if (it == seg.segments.end() || it->second.empty()) throw SkillDegenerate(skill.id, "no segments");
    const auto kept = threshold_segments(it->second, config.threshold_frac, config.threshold_denominator);
    std::vector<State> starts;
    std::vector<State> ends;
    for (const auto& s : kept) {
      starts.push_back(s.start_state);
      ends.push_back(s.end_state);
    }
    out.push_back(build_option(gw, skill, starts, ends, params, static_cast<int>(out.size())));
  }
  return out;
}

// Subcommands -----------------------------------------------------------------

namespace {

SegmenterConfig segmenter_config(const PipelineConfig& config) {
  SegmenterConfig s = config.segmenter;
  s.seed = derive_seed(config.seed, {0x5e9ULL});
  return s;
}

std::string dump(const ordered_json& j) { return j.dump(1) + "\n"; }

}  // namespace

void cmd_gen_demos(const PipelineConfig& config, const std::string& out_path) {
  config.validate();
  const auto gw = load_world(config);
  DemoParams params;
  params.learner.episodes = config.demo_episodes;
  const auto demos = generate_demos(gw, config.num_demos, config.seed, params);
  std::ostringstream out;
  ordered_json meta;
  meta["meta"] = artifact_meta(config);
  out << meta.dump() << '\n';
  write_trajectories(out, demos);
  write_text_file(out_path, out.str());
}

void cmd_segment(const PipelineConfig& config, const std::string& trajectories_path, const std::string& out_path) {
  config.validate();
  const auto gw = load_world(config);
  const auto demos = read_trajectories(trajectories_path, gw);
  if (demos.empty()) throw Error("no trajectories in " + trajectories_path);
  SamplerTrace trace;
  const auto state = run_sampler(gw, demos, segmenter_config(config), &trace);
  write_text_file(out_path, dump(segmentation_to_json(config, state, demos, trace)));
}

void cmd_build_options(const PipelineConfig& config, const std::string& segmentation_path,
                       const std::string& out_path, bool handcrafted) {
  config.validate();
  const auto gw = load_world(config);
  std::vector<Option> options;
  if (handcrafted) {
    options = handcrafted_options(gw);
  } else {
    const auto seg = segmentation_from_json(read_json_file(segmentation_path), gw, segmenter_config(config));
    options = learned_options(gw, seg, config);
  }
  write_text_file(out_path, dump(options_to_json(config, options)));
}

void cmd_evaluate(const PipelineConfig& config, const std::string& options_path, const std::string& out_path) {
  config.validate();
  const auto gw = load_world(config);
  const auto learned = options_from_json(read_json_file(options_path), gw);
  const auto handcrafted = handcrafted_options(gw);
  const std::vector<GoalSpec> goals{{"G1", gw.state(config.goal1)}, {"G2", gw.state(config.goal2)}};
  const auto groups =
      compare(gw, learned, handcrafted, goals, config.runs, config.smdp, derive_seed(config.seed, {0xe7aULL}));
  std::ostringstream out;
  const auto meta = artifact_meta(config);
  out << "# tool=" << kToolName << " version=" << kToolVersion << " config_hash=" << meta["config_hash"].get<std::string>()
      << " seed=" << config.seed << '\n';
  write_curves_csv(out, groups);
  write_text_file(out_path, out.str());
}

void run_pipeline(const PipelineConfig& config) {
  const std::filesystem::path dir(config.output_dir);
  const auto demos = (dir / "trajectories.jsonl").string();
  const auto seg = (dir / "segmentation.json").string();
  const auto opts = (dir / "options.json").string();
  const auto curves = (dir / "curves.csv").string();
  cmd_gen_demos(config, demos);
  cmd_segment(config, demos, seg);
  cmd_build_options(config, seg, opts, false);
  cmd_evaluate(config, opts, curves);
}

}  // namespace optlearn
