#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poseuq/baselines.hpp"
#include "poseuq/camera_pnp.hpp"
#include "poseuq/geometry.hpp"

namespace poseuq {

/// Noise profile of one simulated keypoint detector + PnP pipeline.
struct EstimatorProfile {
  std::string id;
  double sigma0 = 1.0;                   // px, keypoint noise at zero difficulty
  double sigma_h = 4.0;                  // px per unit difficulty
  double gross_failure_base_prob = 0.05; // failure probability per unit difficulty
  double bias_rotation_deg = 0.0;        // fixed rotation offset about a per-estimator axis
  double bias_translation = 0.0;         // m, fixed offset along a per-estimator direction
  bool operator==(const EstimatorProfile&) const = default;
};

/// Registry entry. The keypoint model is always the 9-point cuboid; the ADD
/// cloud is read from `cloud_path` when set, else the 8 cuboid corners.
struct ObjectSpec {
  std::string id;
  Vec3 extents = Vec3::Constant(0.1);  // m (x, y, z); z is up when resting
  std::string cloud_path;
  bool operator==(const ObjectSpec&) const = default;
};

/// Reported confidence = clamp(offset - slope * h + noise * N(0,1), 0, 1).
/// Values above 1 saturate, which makes the detector overconfident.
struct ConfidenceModel {
  double offset = 1.15;
  double slope = 0.5;
  double noise = 0.35;
  bool operator==(const ConfidenceModel&) const = default;
};

/// h = occlusion_weight * occluded fraction + grazing_weight * grazing term
///   + truncation_weight * fraction of keypoints outside the image.
struct DifficultyModel {
  double occlusion_margin = 0.005;  // m
  double occlusion_weight = 2.0;
  double grazing_weight = 0.8;
  double truncation_weight = 2.0;
  bool operator==(const DifficultyModel&) const = default;
};

struct ScenarioConfig {
  int n_sequences = 125;
  int frames_per_sequence = 45;
  double orbit_degrees = 180.0;
  int min_objects = 3;
  int max_objects = 6;
  double table_radius = 0.4;             // m
  double camera_distance_min = 0.8;      // m
  double camera_distance_max = 1.2;      // m
  double camera_elevation_min_deg = 20.0;
  double camera_elevation_max_deg = 55.0;
  CameraIntrinsics camera;
  std::vector<ObjectSpec> objects;
  std::vector<EstimatorProfile> estimators;
  ConfidenceModel confidence;
  DifficultyModel difficulty;
  double keypoint_sigma_noise = 0.25;    // log-normal spread of reported sigmas
  std::uint64_t seed = 2021;

  // Throws ValidationError whose message starts with the offending field path.
  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};

/// Built-in scenario: 8 grocery-sized cuboids, three estimator profiles.
ScenarioConfig default_scenario();

struct Detection {
  Pose pose;
  KeypointSet keypoints;
  DetectionMeta meta;
  bool operator==(const Detection&) const = default;
};

struct EstimatorObservation {
  std::string estimator_id;
  std::optional<Detection> detection;  // empty when the estimator missed the object
  bool detected() const { return detection.has_value(); }
  bool operator==(const EstimatorObservation&) const = default;
};

struct FrameRecord {
  std::uint32_t sequence_id = 0;
  std::uint32_t frame_index = 0;
  std::string object_id;
  CameraIntrinsics intrinsics;
  Pose ground_truth;
  double difficulty = 0.0;
  std::vector<EstimatorObservation> estimates;  // registry order
  bool operator==(const FrameRecord&) const = default;
};

/// Objects with their loaded ADD clouds and keypoint models.
struct ObjectModel {
  ObjectSpec spec;
  PointCloud cloud;
  PointCloud keypoint_model;
};

ObjectModel load_object_model(const ObjectSpec& spec);

struct GenerationOptions {
  unsigned threads = 1;
};

/// Deterministic multi-view dataset: a pure function of the config (seed
/// included). Records are sorted by (sequence_id, frame_index, object_id).
std::vector<FrameRecord> generate_dataset(const ScenarioConfig& config,
                                          const GenerationOptions& options = {});

}  // namespace poseuq
