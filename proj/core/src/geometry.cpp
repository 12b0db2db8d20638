#include "poseuq/geometry.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "poseuq/errors.hpp"

namespace poseuq {

Quat canonicalize(const Quat& q) {
  Quat n = q;
  const double norm = n.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ValidationError("quaternion must be finite and nonzero");
  }
  n.coeffs() /= norm;
  const double c[4] = {n.w(), n.x(), n.y(), n.z()};
  for (double v : c) {
    if (v > 0.0) return n;
    if (v < 0.0) {
      n.coeffs() = -n.coeffs();
      return n;
    }
  }
  return n;
}

Pose::Pose(const Quat& rotation, const Vec3& translation)
    : rotation_(canonicalize(rotation)), translation_(translation) {
  if (!translation_.allFinite()) {
    throw ValidationError("pose translation must be finite");
  }
}

Pose Pose::from_unit(const Quat& rotation, const Vec3& translation) {
  if (!rotation.coeffs().allFinite() || std::abs(rotation.norm() - 1.0) > 1e-9) {
    throw ValidationError("quaternion is not unit norm");
  }
  const double c[4] = {rotation.w(), rotation.x(), rotation.y(), rotation.z()};
  for (double v : c) {
    if (v < 0.0) throw ValidationError("quaternion is not in canonical form");
    if (v > 0.0) break;
  }
  if (!translation.allFinite()) throw ValidationError("pose translation must be finite");
  Pose p;
  p.rotation_ = rotation;
  p.translation_ = translation;
  return p;
}

Pose Pose::from_matrix(const Mat3& rotation, const Vec3& translation) {
  return {Quat(rotation), translation};
}

Pose Pose::from_axis_angle(const Vec3& axis, double angle_rad,
                           const Vec3& translation) {
  return {Quat(Eigen::AngleAxisd(angle_rad, axis.normalized())), translation};
}

Pose Pose::inverse() const {
  const Quat inv = rotation_.conjugate();
  return {inv, -(inv * translation_)};
}

bool Pose::operator==(const Pose& other) const {
  return rotation_.coeffs() == other.rotation_.coeffs() &&
         translation_ == other.translation_;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation() * b.rotation(),
          a.rotation() * b.translation() + a.translation()};
}

PointCloud::PointCloud(std::vector<Vec3> points, std::string object_id)
    : points_(std::move(points)), object_id_(std::move(object_id)) {
  if (points_.empty()) throw ValidationError("empty point cloud");
  for (const auto& p : points_) {
    if (!p.allFinite()) throw ValidationError("point cloud has non-finite coordinates");
  }
}

Vec3 PointCloud::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points_) sum += p;
  return sum / static_cast<double>(points_.size());
}

double PointCloud::max_radius() const {
  double r = 0.0;
  for (const auto& p : points_) r = std::max(r, p.norm());
  return r;
}

double PointCloud::diameter() const {
  double d = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    for (std::size_t j = i + 1; j < points_.size(); ++j) {
      d = std::max(d, (points_[i] - points_[j]).norm());
    }
  }
  return d;
}

PointCloud make_cuboid(const Vec3& extents, std::string object_id) {
  if (!(extents.array() > 0.0).all()) {
    throw ValidationError("cuboid extents must be positive");
  }
  const Vec3 half = 0.5 * extents;
  std::vector<Vec3> corners;
  corners.reserve(8);
  for (int i = 0; i < 8; ++i) {
    corners.emplace_back((i & 4) ? half.x() : -half.x(),
                         (i & 2) ? half.y() : -half.y(),
                         (i & 1) ? half.z() : -half.z());
  }
  return {std::move(corners), std::move(object_id)};
}

PointCloud make_cuboid_keypoints(const Vec3& extents, std::string object_id) {
  auto corners = make_cuboid(extents, object_id);
  std::vector<Vec3> pts(corners.points().begin(), corners.points().end());
  pts.push_back(Vec3::Zero());
  return {std::move(pts), std::move(object_id)};
}

double add_distance(const Pose& p, const Pose& q, const PointCloud& cloud) {
  if (cloud.size() == 0) throw ValidationError("empty point cloud");
  // Difference of the two rigid maps is itself affine: (Rp - Rq) x + (tp - tq).
  const Mat3 dr = p.rotation_matrix() - q.rotation_matrix();
  const Vec3 dt = p.translation() - q.translation();
  double sum = 0.0;
  for (const auto& x : cloud.points()) sum += (dr * x + dt).norm();
  return sum / static_cast<double>(cloud.size());
}

double rotation_angle(const Pose& p, const Pose& q) {
  const Quat rel = p.rotation().conjugate() * q.rotation();
  // atan2 form stays accurate for small angles where acos(|w|) does not.
  const double angle = 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
  return std::min(angle * 180.0 / M_PI, 180.0);
}

double translation_distance(const Pose& p, const Pose& q) {
  return (p.translation() - q.translation()).norm();
}

namespace {

bool parse_double(std::string_view token, double& out) {
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.front())))
    token.remove_prefix(1);
  while (!token.empty() && std::isspace(static_cast<unsigned char>(token.back())))
    token.remove_suffix(1);
  if (token.empty()) return false;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc{} && ptr == end && std::isfinite(out);
}

}  // namespace

PointCloud parse_point_cloud(const std::string& text, std::string object_id) {
  std::vector<Vec3> points;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;

    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    Vec3 p;
    if (fields.size() != 3 || !parse_double(fields[0], p.x()) ||
        !parse_double(fields[1], p.y()) || !parse_double(fields[2], p.z())) {
      throw IoError("point cloud line " + std::to_string(line_no) +
                    ": expected three finite values \"x,y,z\"");
    }
    points.push_back(p);
  }
  if (points.empty()) throw IoError("point cloud file has no points");
  return {std::move(points), std::move(object_id)};
}

PointCloud load_point_cloud(const std::filesystem::path& path, std::string object_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point cloud file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (object_id.empty()) object_id = path.stem().string();
  return parse_point_cloud(buf.str(), std::move(object_id));
}

}  // namespace poseuq
