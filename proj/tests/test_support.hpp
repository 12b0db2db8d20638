#pragma once

#include <cmath>
#include <vector>

#include "poseuq/geometry.hpp"
#include "poseuq/random.hpp"

namespace poseuq::testing {

inline Vec3 random_unit(Rng& rng) {
  Vec3 v(rng.normal(), rng.normal(), rng.normal());
  return v.normalized();
}

inline Quat random_quat(Rng& rng) {
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized();
}

inline Pose random_pose(Rng& rng, double translation_scale = 1.0) {
  return Pose(random_quat(rng), translation_scale * Vec3(rng.normal(), rng.normal(), rng.normal()));
}

// Random pose in front of the default camera at the given depth range.
inline Pose random_camera_pose(Rng& rng, double zmin, double zmax) {
  const double z = rng.uniform(zmin, zmax);
  return Pose(random_quat(rng), Vec3(rng.uniform(-0.1, 0.1) * z, rng.uniform(-0.1, 0.1) * z, z));
}

inline PointCloud random_cloud(Rng& rng, std::size_t n, double scale = 0.1) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    pts.emplace_back(scale * rng.normal(), scale * rng.normal(), scale * rng.normal());
  }
  return PointCloud(std::move(pts), "random");
}

inline Mat3 rot_x(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Vec3::UnitX()).toRotationMatrix();
}
inline Mat3 rot_z(double deg) {
  return Eigen::AngleAxisd(deg * M_PI / 180.0, Vec3::UnitZ()).toRotationMatrix();
}

// 4x4 homogeneous matrix of a pose built from its rotation matrix.
inline Eigen::Matrix4d homogeneous(const Pose& p) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = p.rotation_matrix();
  m.topRightCorner<3, 1>() = p.translation();
  return m;
}

}  // namespace poseuq::testing
