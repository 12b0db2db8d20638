#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "poseuq/camera_pnp.hpp"
#include "poseuq/geometry.hpp"

namespace poseuq {

/// What a keypoint detector reports alongside its keypoints.
struct DetectionMeta {
  double reported_confidence = 1.0;   // in [0, 1]
  std::vector<double> keypoint_sigma;  // per-keypoint 2D std dev, pixels

  void validate(const KeypointSet& keypoints) const;
  bool operator==(const DetectionMeta&) const = default;
};

/// 1 - confidence, so larger means more uncertain.
double confidence_uq(const DetectionMeta& meta);

enum class GuapoReduction {
  kRmsAdd,          // RMS ADD of sampled poses to the unperturbed solution (meters)
  kTranslationStd,  // sample std dev of the sampled translation norms (meters)
};

std::string_view to_string(GuapoReduction r);
std::optional<GuapoReduction> parse_guapo_reduction(std::string_view name);

struct GuapoOptions {
  int samples = 50;
  double sigma_scale = 1.0;
  GuapoReduction reduction = GuapoReduction::kRmsAdd;
};

/// Samples `options.samples` keypoint sets from per-keypoint isotropic
/// Gaussians around the observed keypoints, solves PnP on each and reduces
/// the spread of the resulting poses to one scalar. Draw order: for each
/// sample, for each visible keypoint, u-noise then v-noise. Failed solves are
/// dropped; fewer than two survivors throw ValidationError("GUAPO sampling
/// degenerate"). `add_cloud` defaults to `model_points`.
double guapo_uq(const KeypointSet& observed, const DetectionMeta& meta,
                const PointCloud& model_points, const CameraIntrinsics& intrinsics,
                const GuapoOptions& options, std::uint64_t seed,
                const PointCloud* add_cloud = nullptr);

}  // namespace poseuq
