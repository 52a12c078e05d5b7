#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "emoe/generator.hpp"
#include "emoe/scene_io.hpp"

using namespace emoe;

TEST_CASE("scene file round trip") {
  std::vector<Scene> scenes;
  for (ScenarioType t : kAllScenarioTypes) {
    auto v = generate_synthetic(3, t, 4);
    scenes.insert(scenes.end(), v.begin(), v.end());
  }
  scenes[1].label.reset();
  scenes[2].ego_future_gt.reset();
  scenes[3].agents[0].future_gt.reset();
  const auto path = std::filesystem::temp_directory_path() / "emoe_scene_io_test.jsonl";
  write_scenes(scenes, path);
  CHECK(read_scenes(path) == scenes);
  std::filesystem::remove(path);
}

TEST_CASE("empty input gives an empty list") {
  std::istringstream in("");
  CHECK(parse_scenes(in).empty());
  std::istringstream blank("\n\n");
  CHECK(parse_scenes(blank).empty());
}

TEST_CASE("truncated line reports its line index") {
  const auto scenes = generate_synthetic(4, ScenarioType::Straight, 2);
  std::string text = serialize_scenes(scenes);
  text = text.substr(0, text.size() - 40) + "\n";
  std::istringstream in(text);
  try {
    parse_scenes(in);
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("malformed field is named") {
  const auto scenes = generate_synthetic(4, ScenarioType::Straight, 1);
  auto j = scene_json::to_json(scenes[0]);
  j["agents"][0]["history"][5] = "oops";
  std::istringstream in(j.dump() + "\n");
  try {
    parse_scenes(in);
    FAIL("no error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
    CHECK(e.field() == "agents[0].history[5]");
  }
}
