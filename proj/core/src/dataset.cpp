#include "poseuq/dataset.hpp"

#include <fstream>
#include <sstream>
#include <unistd.h>

#include "poseuq/errors.hpp"

namespace poseuq {

namespace {

[[noreturn]] void field_error(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

const Json& require_field(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) field_error(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) field_error(path + "." + key, "missing field");
  return *it;
}

double as_double(const Json& j, const std::string& path) {
  if (!j.is_number()) field_error(path, "expected a number");
  return j.get<double>();
}

template <typename Int>
Int as_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) field_error(path, "expected an integer");
  if constexpr (std::is_unsigned_v<Int>) {
    if (j.is_number_unsigned()) return static_cast<Int>(j.get<std::uint64_t>());
    const auto v = j.get<std::int64_t>();
    if (v < 0) field_error(path, "expected a non-negative integer");
    return static_cast<Int>(v);
  } else {
    return static_cast<Int>(j.get<std::int64_t>());
  }
}

std::string as_string(const Json& j, const std::string& path) {
  if (!j.is_string()) field_error(path, "expected a string");
  return j.get<std::string>();
}

bool as_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) field_error(path, "expected a boolean");
  return j.get<bool>();
}

// Reads an optional field into `out`, leaving the default when absent.
template <typename Fn>
void optional_field(const Json& j, const char* key, const std::string& path, Fn&& read) {
  if (!j.is_object()) field_error(path, "expected an object");
  auto it = j.find(key);
  if (it != j.end()) read(*it, path + "." + key);
}

Vec3 as_vec3(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) field_error(path, "expected an array of 3 numbers");
  return {as_double(j[0], path + "[0]"), as_double(j[1], path + "[1]"),
          as_double(j[2], path + "[2]")};
}

Json vec_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json pose_json(const Pose& p) {
  const Quat& q = p.rotation();
  return Json{{"q", Json::array({q.w(), q.x(), q.y(), q.z()})},
              {"t", vec_json(p.translation())}};
}

Pose pose_from_json(const Json& j, const std::string& path) {
  const Json& q = require_field(j, "q", path);
  if (!q.is_array() || q.size() != 4) field_error(path + ".q", "expected 4 numbers (w,x,y,z)");
  const Quat quat(as_double(q[0], path + ".q[0]"), as_double(q[1], path + ".q[1]"),
                  as_double(q[2], path + ".q[2]"), as_double(q[3], path + ".q[3]"));
  try {
    return Pose::from_unit(quat, as_vec3(require_field(j, "t", path), path + ".t"));
  } catch (const ValidationError& e) {
    field_error(path, e.what());
  }
}

Json camera_json(const CameraIntrinsics& k) {
  return Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy},
              {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics camera_from_json(const Json& j, const std::string& path) {
  CameraIntrinsics k;
  optional_field(j, "fx", path, [&](const Json& v, const std::string& p) { k.fx = as_double(v, p); });
  optional_field(j, "fy", path, [&](const Json& v, const std::string& p) { k.fy = as_double(v, p); });
  optional_field(j, "cx", path, [&](const Json& v, const std::string& p) { k.cx = as_double(v, p); });
  optional_field(j, "cy", path, [&](const Json& v, const std::string& p) { k.cy = as_double(v, p); });
  optional_field(j, "width", path, [&](const Json& v, const std::string& p) { k.width = as_double(v, p); });
  optional_field(j, "height", path, [&](const Json& v, const std::string& p) { k.height = as_double(v, p); });
  return k;
}

Json estimator_json(const EstimatorProfile& e) {
  return Json{{"id", e.id},
              {"sigma0", e.sigma0},
              {"sigma_h", e.sigma_h},
              {"gross_failure_base_prob", e.gross_failure_base_prob},
              {"bias_rotation_deg", e.bias_rotation_deg},
              {"bias_translation", e.bias_translation}};
}

EstimatorProfile estimator_from_json(const Json& j, const std::string& path) {
  EstimatorProfile e;
  e.id = as_string(require_field(j, "id", path), path + ".id");
  optional_field(j, "sigma0", path, [&](const Json& v, const std::string& p) { e.sigma0 = as_double(v, p); });
  optional_field(j, "sigma_h", path, [&](const Json& v, const std::string& p) { e.sigma_h = as_double(v, p); });
  optional_field(j, "gross_failure_base_prob", path,
                 [&](const Json& v, const std::string& p) { e.gross_failure_base_prob = as_double(v, p); });
  optional_field(j, "bias_rotation_deg", path,
                 [&](const Json& v, const std::string& p) { e.bias_rotation_deg = as_double(v, p); });
  optional_field(j, "bias_translation", path,
                 [&](const Json& v, const std::string& p) { e.bias_translation = as_double(v, p); });
  return e;
}

Json object_json(const ObjectSpec& o) {
  return Json{{"id", o.id}, {"extents", vec_json(o.extents)}, {"cloud_path", o.cloud_path}};
}

ObjectSpec object_from_json(const Json& j, const std::string& path) {
  ObjectSpec o;
  o.id = as_string(require_field(j, "id", path), path + ".id");
  o.extents = as_vec3(require_field(j, "extents", path), path + ".extents");
  optional_field(j, "cloud_path", path,
                 [&](const Json& v, const std::string& p) { o.cloud_path = as_string(v, p); });
  return o;
}

// Scenario fields other than the two registries.
Json scenario_settings_json(const ScenarioConfig& c) {
  return Json{
      {"n_sequences", c.n_sequences},
      {"frames_per_sequence", c.frames_per_sequence},
      {"orbit_degrees", c.orbit_degrees},
      {"min_objects", c.min_objects},
      {"max_objects", c.max_objects},
      {"table_radius", c.table_radius},
      {"camera_distance_min", c.camera_distance_min},
      {"camera_distance_max", c.camera_distance_max},
      {"camera_elevation_min_deg", c.camera_elevation_min_deg},
      {"camera_elevation_max_deg", c.camera_elevation_max_deg},
      {"camera", camera_json(c.camera)},
      {"confidence",
       Json{{"offset", c.confidence.offset}, {"slope", c.confidence.slope}, {"noise", c.confidence.noise}}},
      {"difficulty",
       Json{{"occlusion_margin", c.difficulty.occlusion_margin},
            {"occlusion_weight", c.difficulty.occlusion_weight},
            {"grazing_weight", c.difficulty.grazing_weight},
            {"truncation_weight", c.difficulty.truncation_weight}}},
      {"keypoint_sigma_noise", c.keypoint_sigma_noise},
      {"seed", c.seed},
  };
}

void read_scenario_settings(const Json& j, ScenarioConfig& c, const std::string& root) {
  auto num = [&](const char* key, double& out) {
    optional_field(j, key, root, [&](const Json& v, const std::string& p) { out = as_double(v, p); });
  };
  auto integer = [&](const char* key, int& out) {
    optional_field(j, key, root, [&](const Json& v, const std::string& p) { out = as_int<int>(v, p); });
  };
  integer("n_sequences", c.n_sequences);
  integer("frames_per_sequence", c.frames_per_sequence);
  num("orbit_degrees", c.orbit_degrees);
  integer("min_objects", c.min_objects);
  integer("max_objects", c.max_objects);
  num("table_radius", c.table_radius);
  num("camera_distance_min", c.camera_distance_min);
  num("camera_distance_max", c.camera_distance_max);
  num("camera_elevation_min_deg", c.camera_elevation_min_deg);
  num("camera_elevation_max_deg", c.camera_elevation_max_deg);
  num("keypoint_sigma_noise", c.keypoint_sigma_noise);
  optional_field(j, "camera", root,
                 [&](const Json& v, const std::string& p) { c.camera = camera_from_json(v, p); });
  optional_field(j, "confidence", root, [&](const Json& v, const std::string& p) {
    optional_field(v, "offset", p, [&](const Json& x, const std::string& q) { c.confidence.offset = as_double(x, q); });
    optional_field(v, "slope", p, [&](const Json& x, const std::string& q) { c.confidence.slope = as_double(x, q); });
    optional_field(v, "noise", p, [&](const Json& x, const std::string& q) { c.confidence.noise = as_double(x, q); });
  });
  optional_field(j, "difficulty", root, [&](const Json& v, const std::string& p) {
    auto& d = c.difficulty;
    optional_field(v, "occlusion_margin", p, [&](const Json& x, const std::string& q) { d.occlusion_margin = as_double(x, q); });
    optional_field(v, "occlusion_weight", p, [&](const Json& x, const std::string& q) { d.occlusion_weight = as_double(x, q); });
    optional_field(v, "grazing_weight", p, [&](const Json& x, const std::string& q) { d.grazing_weight = as_double(x, q); });
    optional_field(v, "truncation_weight", p, [&](const Json& x, const std::string& q) { d.truncation_weight = as_double(x, q); });
  });
  optional_field(j, "seed", root,
                 [&](const Json& v, const std::string& p) { c.seed = as_int<std::uint64_t>(v, p); });
}

Json header_json(const ScenarioConfig& c) {
  Json est = Json::array();
  for (const auto& e : c.estimators) est.push_back(estimator_json(e));
  Json obj = Json::array();
  for (const auto& o : c.objects) obj.push_back(object_json(o));
  return Json{{"format_version", kDatasetFormatVersion},
              {"estimators", std::move(est)},
              {"objects", std::move(obj)},
              {"config", scenario_settings_json(c)}};
}

ScenarioConfig scenario_from_header(const Json& j) {
  const auto version = as_int<int>(require_field(j, "format_version", "header"), "header.format_version");
  if (version != kDatasetFormatVersion) {
    field_error("header.format_version", "unsupported version " + std::to_string(version));
  }
  ScenarioConfig c;
  c.objects.clear();
  c.estimators.clear();
  const Json& est = require_field(j, "estimators", "header");
  if (!est.is_array()) field_error("header.estimators", "expected an array");
  for (std::size_t i = 0; i < est.size(); ++i) {
    c.estimators.push_back(estimator_from_json(est[i], "header.estimators[" + std::to_string(i) + "]"));
  }
  const Json& obj = require_field(j, "objects", "header");
  if (!obj.is_array()) field_error("header.objects", "expected an array");
  for (std::size_t i = 0; i < obj.size(); ++i) {
    c.objects.push_back(object_from_json(obj[i], "header.objects[" + std::to_string(i) + "]"));
  }
  read_scenario_settings(require_field(j, "config", "header"), c, "header.config");
  return c;
}

Json detection_json(const std::string& id, const std::optional<Detection>& det) {
  Json j{{"estimator_id", id}, {"detected", det.has_value()}};
  if (!det) return j;
  j["pose"] = pose_json(det->pose);
  Json kp = Json::array();
  Json vis = Json::array();
  for (std::size_t i = 0; i < det->keypoints.size(); ++i) {
    kp.push_back(Json::array({det->keypoints.points[i].x(), det->keypoints.points[i].y()}));
    vis.push_back(static_cast<bool>(det->keypoints.visible[i]));
  }
  j["keypoints"] = std::move(kp);
  j["visible"] = std::move(vis);
  j["confidence"] = det->meta.reported_confidence;
  j["keypoint_sigma"] = det->meta.keypoint_sigma;
  return j;
}

EstimatorObservation observation_from_json(const Json& j, const std::string& path) {
  EstimatorObservation obs;
  obs.estimator_id = as_string(require_field(j, "estimator_id", path), path + ".estimator_id");
  if (!as_bool(require_field(j, "detected", path), path + ".detected")) return obs;

  Detection det;
  det.pose = pose_from_json(require_field(j, "pose", path), path + ".pose");
  const Json& kp = require_field(j, "keypoints", path);
  const Json& vis = require_field(j, "visible", path);
  const Json& sig = require_field(j, "keypoint_sigma", path);
  if (!kp.is_array() || !vis.is_array() || !sig.is_array() || kp.size() != vis.size() ||
      kp.size() != sig.size()) {
    field_error(path, "keypoints, visible and keypoint_sigma must be arrays of equal length");
  }
  for (std::size_t i = 0; i < kp.size(); ++i) {
    const std::string p = path + ".keypoints[" + std::to_string(i) + "]";
    if (!kp[i].is_array() || kp[i].size() != 2) field_error(p, "expected [u, v]");
    det.keypoints.points.emplace_back(as_double(kp[i][0], p), as_double(kp[i][1], p));
    det.keypoints.visible.push_back(as_bool(vis[i], path + ".visible[" + std::to_string(i) + "]"));
    det.meta.keypoint_sigma.push_back(as_double(sig[i], path + ".keypoint_sigma[" + std::to_string(i) + "]"));
  }
  det.meta.reported_confidence = as_double(require_field(j, "confidence", path), path + ".confidence");
  obs.detection = std::move(det);
  return obs;
}

}  // namespace

Json to_json(const ScenarioConfig& cfg) {
  Json j = scenario_settings_json(cfg);
  Json obj = Json::array();
  for (const auto& o : cfg.objects) obj.push_back(object_json(o));
  Json est = Json::array();
  for (const auto& e : cfg.estimators) est.push_back(estimator_json(e));
  j["objects"] = std::move(obj);
  j["estimators"] = std::move(est);
  return j;
}

ScenarioConfig scenario_from_json(const Json& j) {
  if (!j.is_object()) field_error("config", "expected an object");
  ScenarioConfig c = default_scenario();
  read_scenario_settings(j, c, "config");
  optional_field(j, "objects", "config", [&](const Json& v, const std::string& p) {
    if (!v.is_array()) field_error(p, "expected an array");
    c.objects.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      c.objects.push_back(object_from_json(v[i], p + "[" + std::to_string(i) + "]"));
    }
  });
  optional_field(j, "estimators", "config", [&](const Json& v, const std::string& p) {
    if (!v.is_array()) field_error(p, "expected an array");
    c.estimators.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      c.estimators.push_back(estimator_from_json(v[i], p + "[" + std::to_string(i) + "]"));
    }
  });
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ValidationError("config: " + std::string(e.what()));
  }
  ScenarioConfig c = scenario_from_json(j);
  // Relative cloud paths are resolved against the config file's directory.
  for (auto& o : c.objects) {
    if (!o.cloud_path.empty() && std::filesystem::path(o.cloud_path).is_relative()) {
      o.cloud_path = (path.parent_path() / o.cloud_path).lexically_normal().string();
    }
  }
  return c;
}

Json to_json(const FrameRecord& rec) {
  Json est = Json::array();
  for (const auto& e : rec.estimates) est.push_back(detection_json(e.estimator_id, e.detection));
  return Json{{"sequence_id", rec.sequence_id},
              {"frame_index", rec.frame_index},
              {"object_id", rec.object_id},
              {"intrinsics", camera_json(rec.intrinsics)},
              {"ground_truth", pose_json(rec.ground_truth)},
              {"difficulty", rec.difficulty},
              {"estimates", std::move(est)}};
}

FrameRecord frame_record_from_json(const Json& j) {
  const std::string path = "record";
  FrameRecord rec;
  rec.sequence_id = as_int<std::uint32_t>(require_field(j, "sequence_id", path), path + ".sequence_id");
  rec.frame_index = as_int<std::uint32_t>(require_field(j, "frame_index", path), path + ".frame_index");
  rec.object_id = as_string(require_field(j, "object_id", path), path + ".object_id");
  rec.intrinsics = camera_from_json(require_field(j, "intrinsics", path), path + ".intrinsics");
  rec.ground_truth = pose_from_json(require_field(j, "ground_truth", path), path + ".ground_truth");
  rec.difficulty = as_double(require_field(j, "difficulty", path), path + ".difficulty");
  const Json& est = require_field(j, "estimates", path);
  if (!est.is_array()) field_error(path + ".estimates", "expected an array");
  for (std::size_t i = 0; i < est.size(); ++i) {
    rec.estimates.push_back(observation_from_json(est[i], path + ".estimates[" + std::to_string(i) + "]"));
  }
  return rec;
}

void Dataset::validate() const {
  const auto& reg = scenario.estimators;
  const FrameRecord* prev = nullptr;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "record " + std::to_string(r);
    if (prev && std::tie(prev->sequence_id, prev->frame_index, prev->object_id) >=
                    std::tie(rec.sequence_id, rec.frame_index, rec.object_id)) {
      throw ValidationError(where + ": records are not sorted by (sequence, frame, object)");
    }
    prev = &rec;
    if (rec.estimates.size() != reg.size()) {
      throw ValidationError(where + ": estimate count does not match the estimator registry");
    }
    for (std::size_t e = 0; e < reg.size(); ++e) {
      if (rec.estimates[e].estimator_id != reg[e].id) {
        throw ValidationError(where + ": estimator '" + rec.estimates[e].estimator_id +
                              "' out of registry order");
      }
      if (const auto& d = rec.estimates[e].detection) {
        if (d->keypoints.size() != KeypointSet::kCuboidCount) {
          throw ValidationError(where + ": keypoint sets must have 9 entries");
        }
        d->meta.validate(d->keypoints);
      }
    }
    bool known = false;
    for (const auto& o : scenario.objects) known = known || o.id == rec.object_id;
    if (!known) throw ValidationError(where + ": unknown object '" + rec.object_id + "'");
  }
}

std::string serialize_dataset(const Dataset& dataset) {
  std::string out = header_json(dataset.scenario).dump();
  out += '\n';
  for (const auto& rec : dataset.records) {
    out += to_json(rec).dump();
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(const std::string& text) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw IoError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!have_header) {
        ds.scenario = scenario_from_header(j);
        have_header = true;
      } else {
        ds.records.push_back(frame_record_from_json(j));
      }
    } catch (const ValidationError& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw IoError("dataset has no header line");
  ds.validate();
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_dataset(dataset));
}

Json to_json(const LearnedMetricFile& f) {
  const auto& p = f.params;
  Json sizes = p.layer_sizes();
  Json weights = Json::array();
  Json biases = Json::array();
  for (const auto& layer : p.layers) {
    Json w = Json::array();
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
    }
    weights.push_back(std::move(w));
    Json b = Json::array();
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) b.push_back(layer.bias(r));
    biases.push_back(std::move(b));
  }
  Json in_transform = Json::array();
  for (Eigen::Index r = 0; r < p.input_transform.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.input_transform.cols(); ++c) in_transform.push_back(p.input_transform(r, c));
  }
  Json in_offset = Json::array();
  for (Eigen::Index r = 0; r < p.input_offset.size(); ++r) in_offset.push_back(p.input_offset(r));
  Json frames = Json::array();
  for (const auto& [s, fr] : f.training_frames) frames.push_back(Json::array({s, fr}));
  return Json{{"object_id", p.object_id},
              {"target_estimator", p.target_estimator},
              {"target_estimator_id", f.target_estimator_id},
              {"ensemble", f.ensemble},
              {"layer_sizes", std::move(sizes)},
              {"weights", std::move(weights)},
              {"biases", std::move(biases)},
              {"input_offset", std::move(in_offset)},
              {"input_transform", std::move(in_transform)},
              {"seed", f.config.seed},
              {"config",
               Json{{"epochs", f.config.epochs},
                    {"learning_rate", f.config.learning_rate},
                    {"batch_size", f.config.batch_size},
                    {"normalization", std::string(to_string(f.config.normalization))},
                    {"split", f.split}}},
              {"losses",
               Json{{"initial", f.initial_loss}, {"final", f.final_loss}, {"heldout", f.heldout_loss}}},
              {"training_frames", std::move(frames)}};
}

LearnedMetricFile learned_metric_from_json(const Json& j) {
  const std::string path = "params";
  LearnedMetricFile f;
  f.params.object_id = as_string(require_field(j, "object_id", path), path + ".object_id");
  f.params.target_estimator = as_int<int>(require_field(j, "target_estimator", path), path + ".target_estimator");
  f.target_estimator_id = as_string(require_field(j, "target_estimator_id", path), path + ".target_estimator_id");
  const Json& ens = require_field(j, "ensemble", path);
  if (!ens.is_array()) field_error(path + ".ensemble", "expected an array");
  for (std::size_t i = 0; i < ens.size(); ++i) {
    f.ensemble.push_back(as_string(ens[i], path + ".ensemble[" + std::to_string(i) + "]"));
  }

  const Json& sizes = require_field(j, "layer_sizes", path);
  const Json& weights = require_field(j, "weights", path);
  const Json& biases = require_field(j, "biases", path);
  if (!sizes.is_array() || sizes.size() < 2 || !weights.is_array() || !biases.is_array() ||
      weights.size() + 1 != sizes.size() || biases.size() + 1 != sizes.size()) {
    field_error(path, "layer_sizes, weights and biases are inconsistent");
  }
  std::vector<int> dims;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    dims.push_back(as_int<int>(sizes[i], path + ".layer_sizes[" + std::to_string(i) + "]"));
    if (dims.back() <= 0) field_error(path + ".layer_sizes", "sizes must be positive");
  }
  f.config.layer_sizes = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string wp = path + ".weights[" + std::to_string(l) + "]";
    const std::string bp = path + ".biases[" + std::to_string(l) + "]";
    const Json& w = weights[l];
    const Json& b = biases[l];
    if (!w.is_array() || w.size() != static_cast<std::size_t>(dims[l] * dims[l + 1])) {
      field_error(wp, "expected " + std::to_string(dims[l] * dims[l + 1]) + " values");
    }
    if (!b.is_array() || b.size() != static_cast<std::size_t>(dims[l + 1])) {
      field_error(bp, "expected " + std::to_string(dims[l + 1]) + " values");
    }
    DenseLayer layer{Eigen::MatrixXd(dims[l + 1], dims[l]), Eigen::VectorXd(dims[l + 1])};
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = as_double(w[k++], wp);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias(r) = as_double(b[static_cast<std::size_t>(r)], bp);
    }
    f.params.layers.push_back(std::move(layer));
  }
  optional_field(j, "input_offset", path, [&](const Json& v, const std::string& p) {
    if (!v.is_array()) field_error(p, "expected an array");
    if (v.empty()) return;
    if (v.size() != static_cast<std::size_t>(kFeatureDim)) field_error(p, "expected 14 values");
    f.params.input_offset.resize(kFeatureDim);
    for (int i = 0; i < kFeatureDim; ++i) f.params.input_offset(i) = as_double(v[static_cast<std::size_t>(i)], p);
  });
  optional_field(j, "input_transform", path, [&](const Json& v, const std::string& p) {
    if (!v.is_array()) field_error(p, "expected an array");
    if (v.empty()) return;
    if (v.size() != static_cast<std::size_t>(kFeatureDim * kFeatureDim)) field_error(p, "expected 196 values");
    f.params.input_transform.resize(kFeatureDim, kFeatureDim);
    std::size_t k = 0;
    for (int r = 0; r < kFeatureDim; ++r) {
      for (int c = 0; c < kFeatureDim; ++c) f.params.input_transform(r, c) = as_double(v[k++], p);
    }
  });
  try {
    f.params.validate();
  } catch (const ValidationError& e) {
    field_error(path, e.what());
  }

  f.config.seed = as_int<std::uint64_t>(require_field(j, "seed", path), path + ".seed");
  optional_field(j, "config", path, [&](const Json& c, const std::string& p) {
    optional_field(c, "epochs", p, [&](const Json& v, const std::string& q) { f.config.epochs = as_int<int>(v, q); });
    optional_field(c, "learning_rate", p, [&](const Json& v, const std::string& q) { f.config.learning_rate = as_double(v, q); });
    optional_field(c, "batch_size", p, [&](const Json& v, const std::string& q) { f.config.batch_size = as_int<int>(v, q); });
    optional_field(c, "split", p, [&](const Json& v, const std::string& q) { f.split = as_double(v, q); });
    optional_field(c, "normalization", p, [&](const Json& v, const std::string& q) {
      auto n = parse_input_normalization(as_string(v, q));
      if (!n) field_error(q, "expected none, standardize, whiten or pair");
      f.config.normalization = *n;
    });
  });
  optional_field(j, "losses", path, [&](const Json& c, const std::string& p) {
    optional_field(c, "initial", p, [&](const Json& v, const std::string& q) { f.initial_loss = as_double(v, q); });
    optional_field(c, "final", p, [&](const Json& v, const std::string& q) { f.final_loss = as_double(v, q); });
    optional_field(c, "heldout", p, [&](const Json& v, const std::string& q) { f.heldout_loss = as_double(v, q); });
  });
  optional_field(j, "training_frames", path, [&](const Json& v, const std::string& p) {
    if (!v.is_array()) field_error(p, "expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string ip = p + "[" + std::to_string(i) + "]";
      if (!v[i].is_array() || v[i].size() != 2) field_error(ip, "expected [sequence, frame]");
      f.training_frames.emplace_back(as_int<std::uint32_t>(v[i][0], ip), as_int<std::uint32_t>(v[i][1], ip));
    }
  });
  return f;
}

LearnedMetricFile load_learned_metric(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return learned_metric_from_json(j);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace poseuq
