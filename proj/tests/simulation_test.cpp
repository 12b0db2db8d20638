#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "poseuq/baselines.hpp"
#include "poseuq/errors.hpp"
#include "poseuq/evaluation.hpp"
#include "poseuq/simulation.hpp"

namespace poseuq {
namespace {

ScenarioConfig small_scenario(int sequences = 4, int frames = 10) {
  ScenarioConfig cfg = default_scenario();
  cfg.n_sequences = sequences;
  cfg.frames_per_sequence = frames;
  return cfg;
}

// (frame, estimator) ADD errors of detected estimates.
struct Errors {
  std::vector<double> difficulty;
  std::vector<std::vector<double>> add;  // [estimator][frame]; inf when missed
};

Errors frame_errors(const ScenarioConfig& cfg, const std::vector<FrameRecord>& records) {
  std::map<std::string, ObjectModel> models;
  for (const auto& o : cfg.objects) models.emplace(o.id, load_object_model(o));
  Errors out;
  out.add.resize(cfg.estimators.size());
  for (const auto& rec : records) {
    out.difficulty.push_back(rec.difficulty);
    for (std::size_t e = 0; e < rec.estimates.size(); ++e) {
      const auto& d = rec.estimates[e].detection;
      out.add[e].push_back(d ? add_distance(d->pose, rec.ground_truth,
                                            models.at(rec.object_id).cloud)
                             : std::numeric_limits<double>::infinity());
    }
  }
  return out;
}

TEST(DefaultScenario, IsValid) {
  const ScenarioConfig cfg = default_scenario();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.n_sequences, 125);
  EXPECT_EQ(cfg.frames_per_sequence, 45);
  EXPECT_EQ(cfg.estimators.size(), 3u);
  EXPECT_EQ(cfg.objects.size(), 8u);
}

TEST(ScenarioValidate, NamesTheField) {
  auto expect_prefix = [](const ScenarioConfig& cfg, const std::string& prefix) {
    try {
      cfg.validate();
      ADD_FAILURE() << "no error for " << prefix;
    } catch (const ValidationError& e) {
      EXPECT_EQ(std::string(e.what()).rfind(prefix, 0), 0u) << e.what();
    }
  };
  ScenarioConfig cfg = default_scenario();
  cfg.estimators[1].sigma0 = -1.0;
  expect_prefix(cfg, "estimators[1].sigma0");
  cfg = default_scenario();
  cfg.max_objects = 20;
  expect_prefix(cfg, "max_objects");
  cfg = default_scenario();
  cfg.estimators.resize(1);
  expect_prefix(cfg, "estimators");
  cfg = default_scenario();
  cfg.objects[2].id = cfg.objects[0].id;
  expect_prefix(cfg, "objects[2].id");
  cfg = default_scenario();
  cfg.camera.fx = 0.0;
  expect_prefix(cfg, "camera");
}

TEST(GenerateDataset, Deterministic) {
  const ScenarioConfig cfg = small_scenario();
  EXPECT_EQ(generate_dataset(cfg), generate_dataset(cfg));
  ScenarioConfig other = cfg;
  other.seed += 1;
  EXPECT_NE(generate_dataset(cfg), generate_dataset(other));
}

TEST(GenerateDataset, ParallelMatchesSerial) {
  const ScenarioConfig cfg = small_scenario(7, 6);
  EXPECT_EQ(generate_dataset(cfg, {1}), generate_dataset(cfg, {3}));
}

TEST(GenerateDataset, SortedAndWellFormed) {
  const ScenarioConfig cfg = small_scenario();
  const auto records = generate_dataset(cfg);
  ASSERT_FALSE(records.empty());
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& a = records[i - 1];
    const auto& b = records[i];
    EXPECT_LT(std::tie(a.sequence_id, a.frame_index, a.object_id),
              std::tie(b.sequence_id, b.frame_index, b.object_id));
  }
  for (const auto& rec : records) {
    EXPECT_NEAR(rec.ground_truth.rotation().norm(), 1.0, 1e-12);
    EXPECT_GE(rec.ground_truth.rotation().w(), 0.0);
    EXPECT_GE(rec.difficulty, 0.0);
    ASSERT_EQ(rec.estimates.size(), cfg.estimators.size());
    for (std::size_t e = 0; e < rec.estimates.size(); ++e) {
      EXPECT_EQ(rec.estimates[e].estimator_id, cfg.estimators[e].id);
      if (!rec.estimates[e].detection) continue;
      const auto& d = *rec.estimates[e].detection;
      EXPECT_EQ(d.keypoints.size(), 9u);
      EXPECT_EQ(d.meta.keypoint_sigma.size(), 9u);
      EXPECT_GE(d.keypoints.visible_count(), 6u);
      EXPECT_NEAR(d.pose.rotation().norm(), 1.0, 1e-12);
      EXPECT_GE(d.pose.rotation().w(), 0.0);
      EXPECT_NO_THROW(d.meta.validate(d.keypoints));
    }
  }
}

TEST(GenerateDataset, GroundTruthReprojects) {
  const ScenarioConfig cfg = small_scenario(2, 5);
  for (const auto& rec : generate_dataset(cfg)) {
    const auto model = load_object_model(
        *std::find_if(cfg.objects.begin(), cfg.objects.end(),
                      [&](const ObjectSpec& o) { return o.id == rec.object_id; }));
    const KeypointSet kp = project(rec.ground_truth, model.keypoint_model, rec.intrinsics);
    EXPECT_NEAR(reprojection_rmse(rec.ground_truth, model.keypoint_model, kp, rec.intrinsics),
                0.0, 1e-9);
  }
}

TEST(GenerateDataset, NoiselessLimit) {
  ScenarioConfig cfg = small_scenario(3, 8);
  for (auto& e : cfg.estimators) {
    e.sigma0 = 1e-9;
    e.sigma_h = 1e-9;
    e.gross_failure_base_prob = 0.0;
    e.bias_rotation_deg = 0.0;
    e.bias_translation = 0.0;
  }
  const auto records = generate_dataset(cfg);
  const Errors err = frame_errors(cfg, records);
  std::size_t detected = 0;
  for (const auto& column : err.add) {
    for (double v : column) {
      if (std::isinf(v)) continue;
      ++detected;
      EXPECT_LT(v, 1e-6);
    }
  }
  EXPECT_GT(detected, records.size());
}

TEST(GenerateDataset, HardFramesHaveLargerErrors) {
  ScenarioConfig cfg = small_scenario(15, 10);
  for (auto& e : cfg.estimators) e.sigma_h = 5.0;
  const auto records = generate_dataset(cfg);
  ASSERT_GE(records.size(), 500u);
  const Errors err = frame_errors(cfg, records);

  std::vector<std::pair<double, double>> pairs;  // (difficulty, error) of detected frames
  for (std::size_t i = 0; i < 500; ++i) {
    if (std::isfinite(err.add[0][i])) pairs.emplace_back(err.difficulty[i], err.add[0][i]);
  }
  std::sort(pairs.begin(), pairs.end());
  const std::size_t q = pairs.size() / 4;
  double low = 0.0;
  double high = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    low += pairs[i].second;
    high += pairs[pairs.size() - 1 - i].second;
  }
  EXPECT_GT(high / q, low / q);
}

TEST(GenerateDataset, EstimatorErrorsAreCoupled) {
  const ScenarioConfig cfg = small_scenario(15, 10);
  const auto records = generate_dataset(cfg);
  ASSERT_GE(records.size(), 500u);
  const Errors err = frame_errors(cfg, records);
  std::vector<double> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < 500; ++i) {
    if (std::isfinite(err.add[0][i]) && std::isfinite(err.add[1][i])) {
      a.push_back(err.add[0][i]);
      b.push_back(err.add[1][i]);
    }
  }
  EXPECT_GT(spearman(a, b), 0.3);
}

TEST(GenerateDataset, BaselinesFiniteOnDetectedFrames) {
  const ScenarioConfig cfg = small_scenario(3, 6);
  std::map<std::string, ObjectModel> models;
  for (const auto& o : cfg.objects) models.emplace(o.id, load_object_model(o));
  GuapoOptions opt;
  opt.samples = 10;
  for (const auto& rec : generate_dataset(cfg)) {
    for (const auto& est : rec.estimates) {
      if (!est.detection) continue;
      const auto& d = *est.detection;
      EXPECT_TRUE(std::isfinite(confidence_uq(d.meta)));
      const auto& m = models.at(rec.object_id);
      EXPECT_TRUE(std::isfinite(
          guapo_uq(d.keypoints, d.meta, m.keypoint_model, rec.intrinsics, opt, 1, &m.cloud)));
    }
  }
}

TEST(GenerateDataset, PlacementFailureNamesSequence) {
  ScenarioConfig cfg = small_scenario(2, 2);
  cfg.table_radius = 0.01;
  cfg.min_objects = 5;
  cfg.max_objects = 5;
  try {
    generate_dataset(cfg);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("sequence 0:", 0), 0u) << e.what();
  }
}

TEST(LoadObjectModel, DefaultsToCorners) {
  const ObjectModel m = load_object_model({"box", Vec3(0.1, 0.2, 0.3), ""});
  EXPECT_EQ(m.cloud.size(), 8u);
  EXPECT_EQ(m.keypoint_model.size(), 9u);
  EXPECT_NEAR(m.cloud.diameter(), Vec3(0.1, 0.2, 0.3).norm(), 1e-12);
}

}  // namespace
}  // namespace poseuq
