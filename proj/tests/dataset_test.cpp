#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "poseuq/dataset.hpp"
#include "poseuq/errors.hpp"
#include "test_support.hpp"

namespace poseuq {
namespace {

namespace fs = std::filesystem;

Dataset small_dataset() {
  ScenarioConfig cfg = default_scenario();
  cfg.n_sequences = 2;
  cfg.frames_per_sequence = 4;
  return {cfg, generate_dataset(cfg)};
}

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() /
                       ("poseuq_dataset_test_" + std::to_string(::testing::UnitTest::GetInstance()
                                                                     ->random_seed()));
  fs::create_directories(dir);
  return dir;
}

TEST(DatasetText, RoundTripIsByteIdentical) {
  const Dataset d = small_dataset();
  const std::string text = serialize_dataset(d);
  const Dataset parsed = parse_dataset(text);
  EXPECT_EQ(parsed, d);
  EXPECT_EQ(serialize_dataset(parsed), text);
}

TEST(DatasetText, OneHeaderThenOneLinePerRecord) {
  const Dataset d = small_dataset();
  const std::string text = serialize_dataset(d);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')),
            d.records.size() + 1);
  const auto header = Json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(header.at("format_version").get<int>(), kDatasetFormatVersion);
  EXPECT_EQ(header.at("estimators").size(), d.scenario.estimators.size());
}

TEST(DatasetText, DoublesSurviveExactly) {
  Dataset d = small_dataset();
  Rng rng(80);
  d.records[0].difficulty = rng.normal() * 1e-7;
  d.records[0].ground_truth = testing::random_pose(rng, 0.37);
  const Dataset parsed = parse_dataset(serialize_dataset(d));
  EXPECT_EQ(parsed.records[0].difficulty, d.records[0].difficulty);
  EXPECT_EQ(parsed.records[0].ground_truth, d.records[0].ground_truth);
}

TEST(DatasetText, MalformedInputs) {
  const Dataset d = small_dataset();
  EXPECT_THROW(parse_dataset(""), IoError);
  EXPECT_THROW(parse_dataset("{not json\n"), IoError);

  std::string text = serialize_dataset(d);
  const auto first = text.find('\n') + 1;
  const auto second = text.find('\n', first) + 1;
  // Swapping two records breaks the sort order.
  const std::string a = text.substr(first, second - first);
  const auto third = text.find('\n', second) + 1;
  const std::string b = text.substr(second, third - second);
  std::string swapped = text.substr(0, first) + b + a + text.substr(third);
  if (a != b) {
    try {
      parse_dataset(swapped);
      FAIL();
    } catch (const ValidationError& e) {
      EXPECT_NE(std::string(e.what()).find("not sorted"), std::string::npos) << e.what();
    }
  }

  std::string unknown = text;
  const auto pos = unknown.find("\"ndds_dope\"", first);
  unknown.replace(pos, 11, "\"mystery_x\"");
  EXPECT_THROW(parse_dataset(unknown), ValidationError);
}

TEST(DatasetFile, SaveLoadAndAtomicWrite) {
  const fs::path dir = temp_dir();
  const Dataset d = small_dataset();
  save_dataset(d, dir / "d.jsonl");
  EXPECT_EQ(load_dataset(dir / "d.jsonl"), d);
  EXPECT_EQ(read_file(dir / "d.jsonl"), serialize_dataset(d));
  for (const auto& entry : fs::directory_iterator(dir)) {
    EXPECT_EQ(entry.path().filename(), "d.jsonl");
  }
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), IoError);
  EXPECT_THROW(write_file_atomic(dir / "no_such_dir" / "x.json", "{}"), IoError);
  fs::remove_all(dir);
}

TEST(ScenarioJson, RoundTripAndDefaults) {
  const ScenarioConfig cfg = default_scenario();
  EXPECT_EQ(scenario_from_json(to_json(cfg)), cfg);

  Json partial = Json::object();
  partial["n_sequences"] = 3;
  partial["estimators"] = to_json(cfg)["estimators"];
  partial["objects"] = to_json(cfg)["objects"];
  const ScenarioConfig parsed = scenario_from_json(partial);
  EXPECT_EQ(parsed.n_sequences, 3);
  EXPECT_EQ(parsed.frames_per_sequence, cfg.frames_per_sequence);
  EXPECT_EQ(parsed.seed, cfg.seed);
}

TEST(ScenarioJson, ShippedConfigMatchesBuiltIn) {
  const std::string text = read_file(POSEUQ_CONFIG_DIR "/default_scenario.json");
  EXPECT_EQ(scenario_from_json(Json::parse(text)), default_scenario());
}

TEST(ScenarioJson, WrongTypesNameTheField) {
  Json j = to_json(default_scenario());
  j["frames_per_sequence"] = "many";
  try {
    scenario_from_json(j);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("frames_per_sequence"), std::string::npos) << e.what();
  }
  j = to_json(default_scenario());
  j["estimators"][0]["sigma0"] = -2.0;
  try {
    scenario_from_json(j).validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("estimators[0].sigma0"), std::string::npos) << e.what();
  }
}

TEST(LearnedMetricJson, ForwardIsBitExactAfterRoundTrip) {
  Rng rng(81);
  LearnedMetricFile file;
  file.params = LearnedMetricParams::initialize(17);
  file.params.object_id = "milk";
  file.params.target_estimator = 0;
  file.target_estimator_id = "ndds_dope";
  file.ensemble = {"ndds_dope", "ndds_dope_full"};
  file.training_frames = {{0, 3}, {2, 7}};
  file.initial_loss = 1.25;
  file.final_loss = 0.5;
  file.heldout_loss = 0.75;

  std::vector<TrainingRecord> records;
  for (int i = 0; i < 40; ++i) {
    records.push_back({{testing::random_pose(rng), testing::random_pose(rng)}, rng.uniform()});
  }
  fit_input_map(file.params, records, InputNormalization::kPair);

  const Json j = to_json(file);
  const LearnedMetricFile back = learned_metric_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back, file);
  for (const auto& r : records) {
    const Pose& a = r.poses[0];
    const Pose& b = r.poses[1];
    EXPECT_EQ(symmetric_disagreement(back.params, a, b), symmetric_disagreement(file.params, a, b));
  }
}

TEST(LearnedMetricJson, RejectsBadShapes) {
  LearnedMetricFile file;
  file.params = LearnedMetricParams::initialize(3);
  Json j = to_json(file);
  j["weights"][1].erase(j["weights"][1].begin());
  try {
    learned_metric_from_json(j);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("params.weights[1]"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace poseuq
