#include "poseuq/camera_pnp.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "poseuq/errors.hpp"

namespace poseuq {

namespace {

constexpr double kMinDepth = 1e-6;
constexpr std::size_t kMinCorrespondences = 6;

struct Correspondence {
  Vec3 model;
  Vec2 pixel;
};

std::vector<Correspondence> visible_correspondences(const PointCloud& model,
                                                    const KeypointSet& observed) {
  if (observed.points.size() != model.size() ||
      observed.visible.size() != model.size()) {
    throw ValidationError("keypoint count does not match model point count");
  }
  std::vector<Correspondence> out;
  for (std::size_t i = 0; i < model.size(); ++i) {
    if (observed.visible[i]) out.push_back({model.points()[i], observed.points[i]});
  }
  return out;
}

// Sum of squared pixel residuals; +inf if any point is at or behind the camera.
double reprojection_cost(const Quat& q, const Vec3& t,
                         const std::vector<Correspondence>& corr,
                         const CameraIntrinsics& k) {
  double cost = 0.0;
  for (const auto& c : corr) {
    const Vec3 xc = q * c.model + t;
    if (xc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    const double du = k.fx * xc.x() / xc.z() + k.cx - c.pixel.x();
    const double dv = k.fy * xc.y() / xc.z() + k.cy - c.pixel.y();
    cost += du * du + dv * dv;
  }
  return cost;
}

// Direct linear transform on intrinsics-normalized image coordinates with
// Hartley conditioning of both point sets.
Pose dlt_pose(const std::vector<Correspondence>& corr, const CameraIntrinsics& k) {
  const auto n = static_cast<Eigen::Index>(corr.size());

  Eigen::Matrix3Xd img(3, n);
  Eigen::Matrix4Xd obj(4, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = corr[static_cast<std::size_t>(i)];
    img.col(i) << (c.pixel.x() - k.cx) / k.fx, (c.pixel.y() - k.cy) / k.fy, 1.0;
    obj.col(i) << c.model, 1.0;
  }

  const Eigen::Vector2d img_mean = img.topRows<2>().rowwise().mean();
  const double img_spread =
      (img.topRows<2>().colwise() - img_mean).colwise().norm().mean();
  const Eigen::Vector3d obj_mean = obj.topRows<3>().rowwise().mean();
  const double obj_spread =
      (obj.topRows<3>().colwise() - obj_mean).colwise().norm().mean();
  if (!(img_spread > 0.0) || !(obj_spread > 0.0)) {
    throw ValidationError("degenerate configuration");
  }

  Eigen::Matrix3d t_img = Eigen::Matrix3d::Identity();
  const double s_img = std::sqrt(2.0) / img_spread;
  t_img.topLeftCorner<2, 2>() *= s_img;
  t_img.topRightCorner<2, 1>() = -s_img * img_mean;

  Eigen::Matrix4d t_obj = Eigen::Matrix4d::Identity();
  const double s_obj = std::sqrt(3.0) / obj_spread;
  t_obj.topLeftCorner<3, 3>() *= s_obj;
  t_obj.topRightCorner<3, 1>() = -s_obj * obj_mean;

  const Eigen::Matrix3Xd img_n = t_img * img;
  const Eigen::Matrix4Xd obj_n = t_obj * obj;

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2 * n, 12);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVector4d x = obj_n.col(i).transpose();
    const double u = img_n(0, i) / img_n(2, i);
    const double v = img_n(1, i) / img_n(2, i);
    a.block<1, 4>(2 * i, 0) = x;
    a.block<1, 4>(2 * i, 8) = -u * x;
    a.block<1, 4>(2 * i + 1, 4) = x;
    a.block<1, 4>(2 * i + 1, 8) = -v * x;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The solution space must be one-dimensional: rank(A) == 11.
  if (sv.size() < 11 || !(sv(10) > 1e-10 * sv(0))) {
    throw ValidationError("degenerate configuration");
  }
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj_n;
  proj_n.row(0) = p.segment<4>(0).transpose();
  proj_n.row(1) = p.segment<4>(4).transpose();
  proj_n.row(2) = p.segment<4>(8).transpose();

  Eigen::Matrix<double, 3, 4> proj = t_img.inverse() * proj_n * t_obj;
  // The null vector's sign is arbitrary: pick the one that puts the points in
  // front of the camera. det(M) is unreliable for small, distant objects.
  double depth_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) depth_sum += proj.row(2).dot(obj.col(i));
  if (depth_sum < 0.0) proj = -proj;
  const Mat3 m = proj.leftCols<3>();
  Eigen::JacobiSVD<Mat3> msvd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = msvd.matrixU();
  if ((u * msvd.matrixV().transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  const Mat3 r = u * msvd.matrixV().transpose();
  const double scale = msvd.singularValues().mean();
  if (!(scale > 0.0)) throw ValidationError("degenerate configuration");
  const Vec3 t = proj.col(3) / scale;
  return Pose::from_matrix(r, t);
}

// Scaled-orthographic fit: a linear affine camera on normalized coordinates.
// Well behaved for small or distant objects where the DLT is poorly
// conditioned. Returns nullopt when the fit does not give a usable pose.
std::optional<Pose> affine_pose(const std::vector<Correspondence>& corr,
                                const CameraIntrinsics& k) {
  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd a(n, 4);
  Eigen::MatrixXd b(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = corr[static_cast<std::size_t>(i)];
    a.row(i) << c.model.transpose(), 1.0;
    b(i, 0) = (c.pixel.x() - k.cx) / k.fx;
    b(i, 1) = (c.pixel.y() - k.cy) / k.fy;
  }
  const Eigen::MatrixXd sol = a.colPivHouseholderQr().solve(b);
  const Vec3 r1 = sol.col(0).head<3>();
  const Vec3 r2 = sol.col(1).head<3>();
  const double s = 0.5 * (r1.norm() + r2.norm());
  const Vec3 r3 = r1.cross(r2);
  if (!(s > 0.0) || !std::isfinite(s) || !(r3.norm() > 0.0)) return std::nullopt;

  Mat3 m;
  m.row(0) = r1.transpose() / s;
  m.row(1) = r2.transpose() / s;
  m.row(2) = r3.normalized().transpose();
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  if ((u * svd.matrixV().transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  const double z = 1.0 / s;
  return Pose::from_matrix(u * svd.matrixV().transpose(), Vec3(sol(3, 0) * z, sol(3, 1) * z, z));
}

struct Refined {
  Quat q;
  Vec3 t;
  double cost = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Gauss-Newton on the reprojection cost with a left so(3) perturbation and
// step halving; accepted steps never increase the cost.
Refined refine(const Pose& start, const std::vector<Correspondence>& corr,
               const CameraIntrinsics& k, const PnpOptions& options) {
  Refined out{start.rotation(), start.translation()};
  Quat& q = out.q;
  Vec3& t = out.t;
  double& cost = out.cost;
  cost = reprojection_cost(q, t, corr, k);

  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd jac(2 * n, 6);
  Eigen::VectorXd res(2 * n);

  for (int iter = 0; iter < options.max_iterations && std::isfinite(cost); ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = corr[static_cast<std::size_t>(i)];
      const Vec3 rx = q * c.model;
      const Vec3 xc = rx + t;
      const double iz = 1.0 / xc.z();
      res(2 * i) = k.fx * xc.x() * iz + k.cx - c.pixel.x();
      res(2 * i + 1) = k.fy * xc.y() * iz + k.cy - c.pixel.y();

      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * xc.x() * iz * iz,
               0.0, k.fy * iz, -k.fy * xc.y() * iz * iz;
      Mat3 skew;
      skew << 0.0, -rx.z(), rx.y(),
              rx.z(), 0.0, -rx.x(),
              -rx.y(), rx.x(), 0.0;
      jac.block<2, 3>(2 * i, 0) = -dproj * skew;
      jac.block<2, 3>(2 * i, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> jtj = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> jtr = jac.transpose() * res;
    const Eigen::Matrix<double, 6, 1> delta = jtj.ldlt().solve(-jtr);
    if (!delta.allFinite()) break;

    double step = 1.0;
    bool accepted = false;
    for (int halvings = 0; halvings < 40; ++halvings, step *= 0.5) {
      const Vec3 w = step * delta.head<3>();
      const double angle = w.norm();
      const Quat dq = angle > 0.0 ? Quat(Eigen::AngleAxisd(angle, w / angle))
                                  : Quat::Identity();
      const Quat q_new = (dq * q).normalized();
      const Vec3 t_new = t + step * delta.tail<3>();
      const double c_new = reprojection_cost(q_new, t_new, corr, k);
      if (c_new <= cost) {
        q = q_new;
        t = t_new;
        cost = c_new;
        accepted = true;
        break;
      }
    }
    out.iterations = iter + 1;
    if (!accepted || step * delta.norm() < options.step_tolerance) break;
  }
  return out;
}

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ValidationError("focal lengths must be positive");
  if (!(width > 0.0) || !(height > 0.0)) throw ValidationError("image size must be positive");
  if (!(cx >= 0.0 && cx <= width) || !(cy >= 0.0 && cy <= height)) {
    throw ValidationError("principal point must lie inside the image");
  }
}

std::size_t KeypointSet::visible_count() const {
  std::size_t n = 0;
  for (bool v : visible) n += v ? 1 : 0;
  return n;
}

KeypointSet project(const Pose& pose, const PointCloud& model_points,
                    const CameraIntrinsics& k) {
  KeypointSet out;
  out.points.reserve(model_points.size());
  out.visible.reserve(model_points.size());
  for (const auto& x : model_points.points()) {
    const Vec3 xc = pose.apply(x);
    if (xc.z() <= kMinDepth) throw ValidationError("point behind camera");
    const Vec2 px(k.fx * xc.x() / xc.z() + k.cx, k.fy * xc.y() / xc.z() + k.cy);
    out.points.push_back(px);
    out.visible.push_back(k.contains(px));
  }
  return out;
}

PnpResult solve_pnp_detailed(const PointCloud& model_points, const KeypointSet& observed,
                             const CameraIntrinsics& k, const PnpOptions& options) {
  const auto corr = visible_correspondences(model_points, observed);
  if (corr.size() < kMinCorrespondences) {
    throw ValidationError("insufficient correspondences");
  }
  for (const auto& c : corr) {
    if (!c.pixel.allFinite()) throw ValidationError("visible keypoint is not finite");
  }

  PnpResult result;
  result.initial_pose = dlt_pose(corr, k);
  Refined best = refine(result.initial_pose, corr, k, options);
  // A second start guards against the DLT basin sliding off to infinite depth.
  if (const auto alt = affine_pose(corr, k)) {
    Refined other = refine(*alt, corr, k, options);
    if (other.cost < best.cost) best = other;
  }
  result.iterations = best.iterations;

  result.pose = Pose(best.q, best.t);
  for (const auto& x : model_points.points()) {
    if (result.pose.apply(x).z() <= kMinDepth) {
      throw ValidationError("degenerate configuration");
    }
  }
  result.initial_rmse = reprojection_rmse(result.initial_pose, model_points, observed, k);
  result.final_rmse = reprojection_rmse(result.pose, model_points, observed, k);
  return result;
}

double reprojection_rmse(const Pose& pose, const PointCloud& model_points,
                         const KeypointSet& observed, const CameraIntrinsics& k) {
  const auto corr = visible_correspondences(model_points, observed);
  if (corr.empty()) throw ValidationError("no visible keypoints");
  const double cost = reprojection_cost(pose.rotation(), pose.translation(), corr, k);
  return std::sqrt(cost / static_cast<double>(corr.size()));
}

}  // namespace poseuq
