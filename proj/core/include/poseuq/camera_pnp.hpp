#pragma once

#include <vector>

#include "poseuq/geometry.hpp"

namespace poseuq {

using Vec2 = Eigen::Vector2d;

struct CameraIntrinsics {
  double fx = 600.0;
  double fy = 600.0;
  double cx = 320.0;
  double cy = 240.0;
  double width = 640.0;
  double height = 480.0;

  // Throws ValidationError when focal lengths or principal point are invalid.
  void validate() const;
  bool contains(const Vec2& pixel) const {
    return pixel.x() >= 0.0 && pixel.x() <= width && pixel.y() >= 0.0 &&
           pixel.y() <= height;
  }
  bool operator==(const CameraIntrinsics&) const = default;
};

/// 2D observations of the model points, in model-point order. For a cuboid the
/// order is the 8 corners followed by the centroid.
struct KeypointSet {
  static constexpr std::size_t kCuboidCount = 9;

  std::vector<Vec2> points;
  std::vector<bool> visible;

  std::size_t size() const { return points.size(); }
  std::size_t visible_count() const;
  bool operator==(const KeypointSet&) const = default;
};

/// Pinhole projection. Points outside the image rectangle are marked
/// invisible. Throws ValidationError("point behind camera") if any point has
/// camera-frame depth <= 1e-6 m.
KeypointSet project(const Pose& pose, const PointCloud& model_points,
                    const CameraIntrinsics& intrinsics);

struct PnpOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
};

struct PnpResult {
  Pose pose;
  Pose initial_pose;  // DLT estimate before refinement
  int iterations = 0;
  double initial_rmse = 0.0;
  double final_rmse = 0.0;
};

/// Pose from 2D-3D correspondences: normalized DLT for the initial guess,
/// then Gauss-Newton on the reprojection error with step halving. Invisible
/// keypoints are ignored. Throws ValidationError("insufficient
/// correspondences") below 6 visible points and ValidationError("degenerate
/// configuration") when the linear system is rank deficient.
PnpResult solve_pnp_detailed(const PointCloud& model_points, const KeypointSet& observed,
                             const CameraIntrinsics& intrinsics,
                             const PnpOptions& options = {});

inline Pose solve_pnp(const PointCloud& model_points, const KeypointSet& observed,
                      const CameraIntrinsics& intrinsics) {
  return solve_pnp_detailed(model_points, observed, intrinsics).pose;
}

/// Root-mean-square pixel residual over visible keypoints.
double reprojection_rmse(const Pose& pose, const PointCloud& model_points,
                         const KeypointSet& observed,
                         const CameraIntrinsics& intrinsics);

}  // namespace poseuq
