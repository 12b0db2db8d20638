#include "poseuq/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <thread>

#include "poseuq/errors.hpp"
#include "poseuq/random.hpp"

namespace poseuq {

namespace {

constexpr int kMaxPlacementAttempts = 1000;
constexpr double kDegToRad = M_PI / 180.0;

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path + ": " + what);
}

struct PlacedObject {
  const ObjectModel* model;
  Pose world_pose;  // object -> world
  double radius;    // bounding sphere
};

Vec3 random_unit_vector(Rng& rng) {
  // Normalized Gaussian triple is uniform on the sphere.
  Vec3 v;
  do {
    v = Vec3(rng.normal(), rng.normal(), rng.normal());
  } while (v.norm() < 1e-12);
  return v.normalized();
}

// Camera at `center` looking at `target`; returns the world -> camera pose
// with x right, y down, z forward.
Pose look_at(const Vec3& center, const Vec3& target) {
  const Vec3 forward = (target - center).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = Vec3::UnitX();
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 cam_to_world;
  cam_to_world.col(0) = right;
  cam_to_world.col(1) = down;
  cam_to_world.col(2) = forward;
  const Mat3 world_to_cam = cam_to_world.transpose();
  return Pose::from_matrix(world_to_cam, -world_to_cam * center);
}

std::vector<PlacedObject> place_objects(const std::vector<ObjectModel>& registry,
                                        const ScenarioConfig& cfg, std::uint32_t seq,
                                        Rng& rng) {
  const auto span = static_cast<std::uint64_t>(cfg.max_objects - cfg.min_objects + 1);
  const auto count = static_cast<std::size_t>(cfg.min_objects) + rng.uniform_index(span);

  // Partial Fisher-Yates: distinct object ids per scene.
  std::vector<std::size_t> ids(registry.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(ids[i], ids[i + rng.uniform_index(ids.size() - i)]);
  }

  std::vector<PlacedObject> placed;
  for (std::size_t n = 0; n < count; ++n) {
    const ObjectModel& model = registry[ids[n]];
    const double radius = 0.5 * model.spec.extents.norm();
    bool ok = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !ok; ++attempt) {
      const double r = cfg.table_radius * std::sqrt(rng.uniform());
      const double phi = rng.uniform(0.0, 2.0 * M_PI);
      const double yaw = rng.uniform(0.0, 2.0 * M_PI);
      const Vec3 center(r * std::cos(phi), r * std::sin(phi), 0.5 * model.spec.extents.z());
      ok = std::all_of(placed.begin(), placed.end(), [&](const PlacedObject& other) {
        return (other.world_pose.translation() - center).norm() > other.radius + radius;
      });
      if (ok) {
        placed.push_back({&model, Pose::from_axis_angle(Vec3::UnitZ(), yaw, center), radius});
      }
    }
    if (!ok) {
      throw ValidationError("sequence " + std::to_string(seq) +
                            ": object placement failed after " +
                            std::to_string(kMaxPlacementAttempts) + " attempts");
    }
  }
  return placed;
}

double segment_point_distance(const Vec3& a, const Vec3& b, const Vec3& p, double& t_out) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  t_out = t;
  return (a + t * ab - p).norm();
}

double difficulty(const PlacedObject& obj, const std::vector<PlacedObject>& scene,
                  const Vec3& camera_center, const KeypointSet& true_keypoints,
                  const ScenarioConfig& cfg) {
  const auto& kp_model = obj.model->keypoint_model;
  const auto n = static_cast<double>(kp_model.size());

  int occluded = 0;
  for (const auto& x : kp_model.points()) {
    const Vec3 xw = obj.world_pose.apply(x);
    for (const auto& other : scene) {
      if (&other == &obj) continue;
      double t = 0.0;
      const double d =
          segment_point_distance(camera_center, xw, other.world_pose.translation(), t);
      if (d < other.radius + cfg.difficulty.occlusion_margin && t < 1.0) {
        ++occluded;
        break;
      }
    }
  }

  // 0 when a face is seen head-on, 1 when looking along a box diagonal.
  const Vec3 view = (obj.world_pose.translation() - camera_center).normalized();
  const Mat3 axes = obj.world_pose.rotation_matrix();
  const double best = (axes.transpose() * view).cwiseAbs().maxCoeff();
  const double grazing = (1.0 - best) / (1.0 - 1.0 / std::sqrt(3.0));

  const auto truncated =
      static_cast<double>(true_keypoints.size() - true_keypoints.visible_count());

  return cfg.difficulty.occlusion_weight * occluded / n +
         cfg.difficulty.grazing_weight * std::clamp(grazing, 0.0, 1.0) +
         cfg.difficulty.truncation_weight * truncated / n;
}

Pose bias_offset(const EstimatorProfile& est, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0, 0, "", est.id, "bias");
  const Vec3 axis = random_unit_vector(rng);
  const Vec3 dir = random_unit_vector(rng);
  return Pose::from_axis_angle(axis, est.bias_rotation_deg * kDegToRad,
                               est.bias_translation * dir);
}

std::optional<Detection> simulate_estimate(const EstimatorProfile& est, const Pose& bias,
                                           const ObjectModel& model, const Pose& truth,
                                           double h, const ScenarioConfig& cfg, Rng& rng) {
  const double sigma = est.sigma0 + est.sigma_h * h;
  const double fail_prob = std::clamp(est.gross_failure_base_prob * h, 0.0, 1.0);

  // Every draw happens unconditionally so the stream layout is fixed.
  const bool failed = rng.uniform() < fail_prob;
  const Vec3 fail_axis = random_unit_vector(rng);
  const double fail_angle = rng.uniform(0.0, M_PI);
  const Vec3 fail_dir = random_unit_vector(rng);
  const double fail_dist = model.cloud.diameter() * std::cbrt(rng.uniform());

  // Rotation offsets act in the object frame, translation offsets in the camera frame.
  Pose hypothesis(truth.rotation() * bias.rotation(), truth.translation() + bias.translation());
  if (failed) {
    hypothesis = Pose(hypothesis.rotation() * Quat(Eigen::AngleAxisd(fail_angle, fail_axis)),
                      hypothesis.translation() + fail_dist * fail_dir);
  }

  std::vector<Vec2> noise(model.keypoint_model.size());
  for (auto& v : noise) v = Vec2(rng.normal(0.0, sigma), rng.normal(0.0, sigma));
  DetectionMeta meta;
  meta.reported_confidence = std::clamp(
      cfg.confidence.offset - cfg.confidence.slope * h + cfg.confidence.noise * rng.normal(),
      0.0, 1.0);
  for (std::size_t i = 0; i < model.keypoint_model.size(); ++i) {
    meta.keypoint_sigma.push_back(sigma * std::exp(cfg.keypoint_sigma_noise * rng.normal()));
  }

  KeypointSet keypoints;
  try {
    keypoints = project(hypothesis, model.keypoint_model, cfg.camera);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    keypoints.points[i] += noise[i];
    keypoints.visible[i] = cfg.camera.contains(keypoints.points[i]);
  }
  try {
    Pose pose = solve_pnp(model.keypoint_model, keypoints, cfg.camera);
    return Detection{pose, std::move(keypoints), std::move(meta)};
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

std::vector<FrameRecord> generate_sequence(const ScenarioConfig& cfg,
                                           const std::vector<ObjectModel>& registry,
                                           const std::vector<Pose>& biases,
                                           std::uint32_t seq) {
  Rng scene_rng = derive_rng(cfg.seed, seq, 0, "", "", "scene");
  const auto placed = place_objects(registry, cfg, seq, scene_rng);

  const double distance = scene_rng.uniform(cfg.camera_distance_min, cfg.camera_distance_max);
  const double elevation = kDegToRad * scene_rng.uniform(cfg.camera_elevation_min_deg,
                                                         cfg.camera_elevation_max_deg);
  const double azimuth0 = scene_rng.uniform(0.0, 2.0 * M_PI);
  const Vec3 target(0.0, 0.0, 0.05);

  std::vector<FrameRecord> out;
  for (int f = 0; f < cfg.frames_per_sequence; ++f) {
    const double frac =
        cfg.frames_per_sequence > 1 ? static_cast<double>(f) / (cfg.frames_per_sequence - 1) : 0.0;
    const double azimuth = azimuth0 + kDegToRad * cfg.orbit_degrees * frac;
    const Vec3 center = target + distance * Vec3(std::cos(elevation) * std::cos(azimuth),
                                                 std::cos(elevation) * std::sin(azimuth),
                                                 std::sin(elevation));
    const Pose world_to_cam = look_at(center, target);

    for (const auto& obj : placed) {
      FrameRecord rec;
      rec.sequence_id = seq;
      rec.frame_index = static_cast<std::uint32_t>(f);
      rec.object_id = obj.model->spec.id;
      rec.intrinsics = cfg.camera;
      rec.ground_truth = compose(world_to_cam, obj.world_pose);

      KeypointSet truth_kp;
      try {
        truth_kp = project(rec.ground_truth, obj.model->keypoint_model, cfg.camera);
      } catch (const ValidationError&) {
        continue;  // object straddles the camera plane: not observable
      }
      rec.difficulty = difficulty(obj, placed, center, truth_kp, cfg);

      for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
        const auto& est = cfg.estimators[e];
        Rng rng = derive_rng(cfg.seed, seq, static_cast<std::uint64_t>(f), rec.object_id,
                             est.id, "estimate");
        rec.estimates.push_back({est.id, simulate_estimate(est, biases[e], *obj.model,
                                                           rec.ground_truth, rec.difficulty,
                                                           cfg, rng)});
      }
      out.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace

void ScenarioConfig::validate() const {
  require(n_sequences >= 1, "n_sequences", "must be >= 1");
  require(frames_per_sequence >= 1, "frames_per_sequence", "must be >= 1");
  require(std::isfinite(orbit_degrees) && orbit_degrees >= 0.0, "orbit_degrees",
          "must be finite and >= 0");
  require(min_objects >= 1, "min_objects", "must be >= 1");
  require(max_objects >= min_objects, "max_objects", "must be >= min_objects");
  require(static_cast<std::size_t>(max_objects) <= objects.size(), "max_objects",
          "exceeds the object registry size");
  require(table_radius > 0.0, "table_radius", "must be positive");
  require(camera_distance_min > 0.0, "camera_distance_min", "must be positive");
  require(camera_distance_max >= camera_distance_min, "camera_distance_max",
          "must be >= camera_distance_min");
  require(camera_elevation_min_deg > 0.0 && camera_elevation_max_deg < 90.0 &&
              camera_elevation_min_deg <= camera_elevation_max_deg,
          "camera_elevation_min_deg", "elevation range must lie in (0, 90)");
  try {
    camera.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("camera: ") + e.what());
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string path = "objects[" + std::to_string(i) + "]";
    require(!objects[i].id.empty(), path + ".id", "must be nonempty");
    require(ids.insert(objects[i].id).second, path + ".id", "duplicate object id");
    require((objects[i].extents.array() > 0.0).all() && objects[i].extents.allFinite(),
            path + ".extents", "must be positive");
  }
  ids.clear();
  require(estimators.size() >= 2, "estimators", "at least two estimators are required");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    const auto& e = estimators[i];
    const std::string path = "estimators[" + std::to_string(i) + "]";
    require(!e.id.empty(), path + ".id", "must be nonempty");
    require(ids.insert(e.id).second, path + ".id", "duplicate estimator id");
    require(e.sigma0 > 0.0 && std::isfinite(e.sigma0), path + ".sigma0", "must be positive");
    require(e.sigma_h > 0.0 && std::isfinite(e.sigma_h), path + ".sigma_h", "must be positive");
    require(e.gross_failure_base_prob >= 0.0 && e.gross_failure_base_prob <= 1.0,
            path + ".gross_failure_base_prob", "must lie in [0, 1]");
    require(std::isfinite(e.bias_rotation_deg), path + ".bias_rotation_deg", "must be finite");
    require(std::isfinite(e.bias_translation), path + ".bias_translation", "must be finite");
  }
  require(confidence.noise >= 0.0 && std::isfinite(confidence.noise), "confidence.noise",
          "must be >= 0");
  require(std::isfinite(confidence.offset) && std::isfinite(confidence.slope),
          "confidence", "offset and slope must be finite");
  require(difficulty.occlusion_margin >= 0.0, "difficulty.occlusion_margin", "must be >= 0");
  require(difficulty.occlusion_weight >= 0.0 && difficulty.grazing_weight >= 0.0 &&
              difficulty.truncation_weight >= 0.0,
          "difficulty", "weights must be >= 0");
  require(keypoint_sigma_noise >= 0.0 && std::isfinite(keypoint_sigma_noise),
          "keypoint_sigma_noise", "must be >= 0");
}

ScenarioConfig default_scenario() {
  ScenarioConfig cfg;
  cfg.objects = {
      {"alphabet_soup", Vec3(0.066, 0.066, 0.083), ""},
      {"bbq_sauce", Vec3(0.064, 0.042, 0.165), ""},
      {"butter", Vec3(0.104, 0.053, 0.036), ""},
      {"cookies", Vec3(0.167, 0.053, 0.213), ""},
      {"corn", Vec3(0.058, 0.058, 0.088), ""},
      {"ketchup", Vec3(0.065, 0.044, 0.162), ""},
      {"mac_and_cheese", Vec3(0.167, 0.040, 0.124), ""},
      {"milk", Vec3(0.073, 0.073, 0.192), ""},
  };
  cfg.estimators = {
      {"ndds_dope", 1.5, 4.0, 0.05, 2.0, 0.004},
      {"ndds_dope_full", 1.2, 4.5, 0.06, 3.0, 0.003},
      {"visii_dope", 0.8, 2.5, 0.03, 1.0, 0.002},
  };
  return cfg;
}

ObjectModel load_object_model(const ObjectSpec& spec) {
  PointCloud cloud = spec.cloud_path.empty() ? make_cuboid(spec.extents, spec.id)
                                             : load_point_cloud(spec.cloud_path, spec.id);
  return {spec, std::move(cloud), make_cuboid_keypoints(spec.extents, spec.id)};
}

std::vector<FrameRecord> generate_dataset(const ScenarioConfig& cfg,
                                          const GenerationOptions& options) {
  cfg.validate();
  std::vector<ObjectModel> registry;
  for (const auto& spec : cfg.objects) registry.push_back(load_object_model(spec));
  std::vector<Pose> biases;
  for (const auto& est : cfg.estimators) biases.push_back(bias_offset(est, cfg.seed));

  const auto n_seq = static_cast<std::size_t>(cfg.n_sequences);
  std::vector<std::vector<FrameRecord>> per_seq(n_seq);
  std::vector<std::exception_ptr> errors(n_seq);
  auto work = [&](std::size_t s) {
    try {
      per_seq[s] = generate_sequence(cfg, registry, biases, static_cast<std::uint32_t>(s));
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(options.threads,
                                                           static_cast<unsigned>(n_seq)));
  if (threads == 1) {
    for (std::size_t s = 0; s < n_seq; ++s) work(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < n_seq; s += threads) work(s);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<FrameRecord> out;
  for (auto& seq : per_seq) {
    for (auto& rec : seq) out.push_back(std::move(rec));
  }
  std::stable_sort(out.begin(), out.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return std::tie(a.sequence_id, a.frame_index, a.object_id) <
           std::tie(b.sequence_id, b.frame_index, b.object_id);
  });
  return out;
}

}  // namespace poseuq
