#include "poseuq/baselines.hpp"

#include <cmath>

#include "poseuq/errors.hpp"
#include "poseuq/random.hpp"

namespace poseuq {

void DetectionMeta::validate(const KeypointSet& keypoints) const {
  if (!(reported_confidence >= 0.0 && reported_confidence <= 1.0)) {
    throw ValidationError("reported confidence must lie in [0, 1]");
  }
  if (keypoint_sigma.size() != keypoints.size()) {
    throw ValidationError("keypoint sigma count does not match keypoint count");
  }
  for (std::size_t i = 0; i < keypoint_sigma.size(); ++i) {
    if (keypoints.visible[i] && !(keypoint_sigma[i] > 0.0 && std::isfinite(keypoint_sigma[i]))) {
      throw ValidationError("visible keypoint sigma must be positive");
    }
  }
}

double confidence_uq(const DetectionMeta& meta) {
  if (!(meta.reported_confidence >= 0.0 && meta.reported_confidence <= 1.0)) {
    throw ValidationError("reported confidence must lie in [0, 1]");
  }
  return 1.0 - meta.reported_confidence;
}

std::string_view to_string(GuapoReduction r) {
  return r == GuapoReduction::kRmsAdd ? "rms_add" : "translation_std";
}

std::optional<GuapoReduction> parse_guapo_reduction(std::string_view name) {
  if (name == "rms_add") return GuapoReduction::kRmsAdd;
  if (name == "translation_std") return GuapoReduction::kTranslationStd;
  return std::nullopt;
}

double guapo_uq(const KeypointSet& observed, const DetectionMeta& meta,
                const PointCloud& model_points, const CameraIntrinsics& intrinsics,
                const GuapoOptions& options, std::uint64_t seed,
                const PointCloud* add_cloud) {
  if (options.samples < 2) throw ValidationError("GUAPO needs at least two samples");
  if (!(options.sigma_scale > 0.0)) throw ValidationError("GUAPO sigma scale must be positive");
  meta.validate(observed);
  const PointCloud& cloud = add_cloud ? *add_cloud : model_points;

  const Pose center = solve_pnp(model_points, observed, intrinsics);

  Rng rng(seed);
  std::vector<Pose> samples;
  samples.reserve(static_cast<std::size_t>(options.samples));
  KeypointSet perturbed = observed;
  for (int s = 0; s < options.samples; ++s) {
    for (std::size_t i = 0; i < observed.size(); ++i) {
      if (!observed.visible[i]) continue;
      const double sigma = meta.keypoint_sigma[i] * options.sigma_scale;
      const double du = rng.normal(0.0, sigma);
      const double dv = rng.normal(0.0, sigma);
      perturbed.points[i] = observed.points[i] + Vec2(du, dv);
    }
    try {
      samples.push_back(solve_pnp(model_points, perturbed, intrinsics));
    } catch (const ValidationError&) {
      // dropped sample
    }
  }
  if (samples.size() < 2) throw ValidationError("GUAPO sampling degenerate");

  const auto n = static_cast<double>(samples.size());
  if (options.reduction == GuapoReduction::kRmsAdd) {
    double sq = 0.0;
    for (const auto& p : samples) {
      const double d = add_distance(p, center, cloud);
      sq += d * d;
    }
    return std::sqrt(sq / n);
  }
  double mean = 0.0;
  for (const auto& p : samples) mean += p.translation().norm();
  mean /= n;
  double var = 0.0;
  for (const auto& p : samples) {
    const double d = p.translation().norm() - mean;
    var += d * d;
  }
  return std::sqrt(var / (n - 1.0));
}

}  // namespace poseuq
