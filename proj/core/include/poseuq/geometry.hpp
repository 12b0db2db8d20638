#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace poseuq {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

/// Rigid transform: a unit quaternion rotation followed by a translation in
/// meters. Every constructor normalizes the quaternion and puts it in the
/// canonical hemisphere (w >= 0; if w == 0 the first nonzero component is
/// positive), so two poses describing the same transform compare equal.
class Pose {
 public:
  Pose() = default;
  Pose(const Quat& rotation, const Vec3& translation);

  static Pose identity() { return {}; }
  /// Adopts an already normalized, canonical quaternion bit for bit (used when
  /// reading serialized poses). Throws ValidationError if |q| differs from 1
  /// by more than 1e-9 or q is not in the canonical hemisphere.
  static Pose from_unit(const Quat& rotation, const Vec3& translation);
  static Pose from_matrix(const Mat3& rotation, const Vec3& translation);
  static Pose from_axis_angle(const Vec3& axis, double angle_rad,
                              const Vec3& translation = Vec3::Zero());

  const Quat& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat3 rotation_matrix() const { return rotation_.toRotationMatrix(); }

  Vec3 apply(const Vec3& point) const { return rotation_ * point + translation_; }
  Pose inverse() const;

  bool operator==(const Pose& other) const;

 private:
  Quat rotation_{Quat::Identity()};
  Vec3 translation_{Vec3::Zero()};
};

/// Returns q (normalized) in the canonical hemisphere.
Quat canonicalize(const Quat& q);

/// a ∘ b: applies b first, then a.
Pose compose(const Pose& a, const Pose& b);

class PointCloud {
 public:
  PointCloud(std::vector<Vec3> points, std::string object_id);

  std::span<const Vec3> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const std::string& object_id() const { return object_id_; }

  Vec3 centroid() const;
  // Largest distance from the origin of the model frame.
  double max_radius() const;
  // Largest pairwise point distance.
  double diameter() const;

  bool operator==(const PointCloud& other) const = default;

 private:
  std::vector<Vec3> points_;
  std::string object_id_;
};

/// 8 corners of an axis-aligned box centered at the origin. Corner i has
/// coordinate signs (x: bit 2, y: bit 1, z: bit 0) with 0 meaning negative.
PointCloud make_cuboid(const Vec3& extents, std::string object_id);

/// Corners followed by the centroid (9 points): the keypoint model of a box.
PointCloud make_cuboid_keypoints(const Vec3& extents, std::string object_id);

/// Mean Euclidean distance between the cloud transformed by p and by q
/// (meters). Throws ValidationError("empty point cloud") on empty input.
double add_distance(const Pose& p, const Pose& q, const PointCloud& cloud);

/// Geodesic angle of the relative rotation in degrees, in [0, 180].
double rotation_angle(const Pose& p, const Pose& q);

/// Euclidean distance between the translations (meters).
double translation_distance(const Pose& p, const Pose& q);

/// Reads "x,y,z" lines (meters). Blank lines and '#' comments are skipped.
PointCloud load_point_cloud(const std::filesystem::path& path,
                            std::string object_id = {});
PointCloud parse_point_cloud(const std::string& text, std::string object_id);

}  // namespace poseuq
