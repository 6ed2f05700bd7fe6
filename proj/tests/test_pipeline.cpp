#include "doctest.h"

#include "optlearn/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace optlearn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("optlearn_test_" + name);
  fs::remove_all(dir);
  return dir;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.num_demos = 40;
  c.segmenter.sweeps = 8;
  c.runs = 2;
  c.smdp.episodes = 20;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config round-trips through JSON") {
  PipelineConfig c;
  c.num_demos = 77;
  c.segmenter.tau = 2.5;
  c.segmenter.irl.learning_rate = 0.05;
  c.threshold_denominator = ThresholdDenominator::Occurrences;
  c.goal2 = {3, 3};
  c.output_dir = "elsewhere";
  const auto back = config_from_json(nlohmann::json::parse(to_json(c).dump()));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.goal2 == Coord{3, 3});
  CHECK(back.segmenter.irl.learning_rate == 0.05);
}

TEST_CASE("config parsing rejects unknown keys and bad values") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"sweep": 10})")), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"threshold_denominator": "all"})")), Error);
  CHECK(config_from_json(nlohmann::json::parse(R"({"sweeps": 10})")).segmenter.sweeps == 10);
  PipelineConfig c;
  c.nu = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.map_path = "/nonexistent/map.txt";
  CHECK_THROWS_AS(c.validate(), Error);
  c = {};
  c.segmenter.birth_min_window = 10;
  c.segmenter.birth_max_window = 5;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_NOTHROW(PipelineConfig{}.validate());
}

TEST_CASE("config hash ignores the output directory only") {
  PipelineConfig a, b;
  b.output_dir = "somewhere/else";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  const auto meta = artifact_meta(a);
  CHECK(meta["tool"] == "optlearn");
  CHECK(meta["version"] == "0.1.0");
  CHECK(meta["seed"] == 1);
  CHECK_FALSE(result_config_json(a).contains("output_dir"));
}

TEST_CASE("handcrafted options round-trip through JSON") {
  const auto gw = four_rooms();
  const auto opts = handcrafted_options(gw);
  PipelineConfig c;
  auto j = options_to_json(c, opts);
  const auto back = options_from_json(nlohmann::json::parse(j.dump()), gw);
  REQUIRE(back.size() == opts.size());
  for (std::size_t i = 0; i < opts.size(); ++i) {
    CHECK(back[i].initiation == opts[i].initiation);
    CHECK(back[i].termination == opts[i].termination);
    CHECK(back[i].policy == opts[i].policy);
    CHECK(back[i].source == OptionSource::Handcrafted);
  }
  j["options"][0]["policy"] = nlohmann::json::object();
  CHECK_THROWS_AS(options_from_json(nlohmann::json::parse(j.dump()), gw), Error);
  CHECK_THROWS_AS(options_from_json(nlohmann::json::parse("{}"), gw), Error);
}

TEST_CASE("stages chain through files and repeat byte for byte") {
  const auto a = scratch_dir("run_a");
  const auto b = scratch_dir("run_b");
  auto c = small_config();
  c.output_dir = a.string();
  run_pipeline(c);
  c.output_dir = b.string();
  run_pipeline(c);
  for (const char* name : {"trajectories.jsonl", "segmentation.json", "options.json", "curves.csv"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(a / name));
    CHECK(slurp(a / name) == slurp(b / name));
  }
  const auto gw = four_rooms();
  const auto demos = read_trajectories((a / "trajectories.jsonl").string(), gw);
  CHECK(demos.size() == 40);
  const auto seg_json = read_json_file((a / "segmentation.json").string());
  CHECK(seg_json["meta"]["config_hash"] == config_hash(c));
  const auto seg = segmentation_from_json(seg_json, gw, c.segmenter);
  CHECK(static_cast<int>(seg.skills.size()) == seg_json["num_skills"].get<int>());
  CHECK(seg.labels.size() == 40);
  const auto opts = options_from_json(read_json_file((a / "options.json").string()), gw);
  CHECK(opts.size() == seg.skills.size());
  const auto csv = slurp(a / "curves.csv");
  CHECK(csv.rfind("# tool=optlearn version=0.1.0 config_hash=" + config_hash(c) + " seed=3\n", 0) == 0);
  CHECK(csv.find("goal,condition,episode,mean_steps,stderr,runs\n") != std::string::npos);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("missing inputs are reported") {
  const auto c = small_config();
  CHECK_THROWS_AS(cmd_segment(c, "/nonexistent.jsonl", "/tmp/x.json"), Error);
  CHECK_THROWS_AS(cmd_evaluate(c, "/nonexistent.json", "/tmp/x.csv"), Error);
  CHECK_THROWS_AS(read_json_file("/nonexistent.json"), Error);
}

}  // TEST_SUITE
