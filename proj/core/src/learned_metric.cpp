#include "poseuq/learned_metric.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "poseuq/errors.hpp"
#include "poseuq/random.hpp"

namespace poseuq {

namespace {

// Features for both argument orders of every pair i<j of every record, plus
// the column range of each record.
struct BatchFeatures {
  Eigen::MatrixXd x;
  std::vector<Eigen::Index> offsets;  // record m owns columns [offsets[m], offsets[m+1])
};

BatchFeatures build_features(std::span<const TrainingRecord> batch) {
  BatchFeatures out;
  out.offsets.reserve(batch.size() + 1);
  Eigen::Index cols = 0;
  out.offsets.push_back(0);
  for (const auto& r : batch) {
    const auto k = static_cast<Eigen::Index>(r.poses.size());
    if (k < 2) throw ValidationError("ensemble requires at least two estimators");
    cols += k * (k - 1);
    out.offsets.push_back(cols);
  }
  out.x.resize(kFeatureDim, cols);
  Eigen::Index c = 0;
  for (const auto& r : batch) {
    for (std::size_t i = 0; i < r.poses.size(); ++i) {
      for (std::size_t j = i + 1; j < r.poses.size(); ++j) {
        out.x.col(c++) = featurize(r.poses[i], r.poses[j]);
        out.x.col(c++) = featurize(r.poses[j], r.poses[i]);
      }
    }
  }
  return out;
}

struct Activations {
  std::vector<Eigen::MatrixXd> values;  // values[0] = input, values[l+1] = layer l output
};

Activations run_layers(const LearnedMetricParams& params, const Eigen::MatrixXd& x) {
  Activations act;
  act.values.reserve(params.layers.size() + 1);
  act.values.push_back(params.map_inputs(x));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Eigen::MatrixXd z = layer.weights * act.values.back();
    z.colwise() += layer.bias;
    if (l + 1 < params.layers.size()) z = z.cwiseMax(0.0);
    act.values.push_back(std::move(z));
  }
  return act;
}

// Per-record mean of the symmetric pair values: (1 / 2C) * sum of both orders.
Eigen::VectorXd record_predictions(const Eigen::RowVectorXd& out,
                                   const std::vector<Eigen::Index>& offsets) {
  Eigen::VectorXd pred(static_cast<Eigen::Index>(offsets.size() - 1));
  for (Eigen::Index m = 0; m < pred.size(); ++m) {
    const auto begin = offsets[static_cast<std::size_t>(m)];
    const auto n = offsets[static_cast<std::size_t>(m) + 1] - begin;
    pred(m) = out.segment(begin, n).sum() / static_cast<double>(n);
  }
  return pred;
}

void check_input(const LearnedMetricParams& params, Eigen::Index rows) {
  if (params.layers.empty()) throw ValidationError("network has no layers");
  if (params.layers.front().weights.cols() != rows) {
    throw ValidationError("input dimension " + std::to_string(rows) +
                          " does not match network input " +
                          std::to_string(params.layers.front().weights.cols()));
  }
}

bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

Eigen::MatrixXd LearnedMetricParams::map_inputs(const Eigen::MatrixXd& x) const {
  if (!has_input_map()) return x;
  return input_transform * (x.colwise() - input_offset);
}

bool LearnedMetricParams::operator==(const LearnedMetricParams& other) const {
  return object_id == other.object_id && target_estimator == other.target_estimator &&
         layers == other.layers && same(input_transform, other.input_transform) &&
         same(input_offset, other.input_offset);
}

std::string_view to_string(InputNormalization n) {
  switch (n) {
    case InputNormalization::kNone: return "none";
    case InputNormalization::kStandardize: return "standardize";
    case InputNormalization::kWhiten: return "whiten";
    case InputNormalization::kPair: return "pair";
  }
  return "unknown";
}

std::optional<InputNormalization> parse_input_normalization(std::string_view name) {
  if (name == "none") return InputNormalization::kNone;
  if (name == "standardize") return InputNormalization::kStandardize;
  if (name == "whiten") return InputNormalization::kWhiten;
  if (name == "pair") return InputNormalization::kPair;
  return std::nullopt;
}

void fit_input_map(LearnedMetricParams& params, std::span<const TrainingRecord> records,
                   InputNormalization mode) {
  params.input_transform.resize(0, 0);
  params.input_offset.resize(0);
  if (mode == InputNormalization::kNone || records.empty()) return;

  Eigen::MatrixXd x = build_features(records).x;
  Eigen::MatrixXd basis = Eigen::MatrixXd::Identity(kFeatureDim, kFeatureDim);
  if (mode == InputNormalization::kPair) {
    constexpr int h = kFeatureDim / 2;
    basis.setZero();
    for (int i = 0; i < h; ++i) {
      basis(i, i) = 0.5;
      basis(i, i + h) = 0.5;
      basis(i + h, i) = 1.0;
      basis(i + h, i + h) = -1.0;
    }
    x = basis * x;
  }
  const Eigen::VectorXd mu = x.rowwise().mean();
  const Eigen::MatrixXd centered = x.colwise() - mu;
  const double n = static_cast<double>(x.cols());
  // Floor keeps constant features (zero variance) finite.
  constexpr double kVarianceFloor = 1e-12;

  if (mode == InputNormalization::kStandardize || mode == InputNormalization::kPair) {
    const Eigen::VectorXd var = centered.rowwise().squaredNorm() / n;
    params.input_transform = (var.array() + kVarianceFloor).rsqrt().matrix().asDiagonal() * basis;
    // map_inputs subtracts the offset before the transform.
    params.input_offset = basis.inverse() * mu;
    return;
  } else {
    const Eigen::MatrixXd cov = centered * centered.transpose() / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd inv_sqrt =
        (eig.eigenvalues().array().max(0.0) + kVarianceFloor).rsqrt().matrix();
    params.input_transform =
        eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
  }
  params.input_offset = mu;
}

FeatureVec featurize(const Pose& a, const Pose& b) {
  FeatureVec f;
  const Quat qa = canonicalize(a.rotation());
  const Quat qb = canonicalize(b.rotation());
  f << qa.w(), qa.x(), qa.y(), qa.z(), a.translation(),
       qb.w(), qb.x(), qb.y(), qb.z(), b.translation();
  return f;
}

const std::vector<int>& LearnedMetricParams::default_layer_sizes() {
  static const std::vector<int> sizes{kFeatureDim, 64, 64, 64, 1};
  return sizes;
}

std::vector<int> LearnedMetricParams::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(static_cast<int>(layers.front().weights.cols()));
  for (const auto& l : layers) sizes.push_back(static_cast<int>(l.weights.rows()));
  return sizes;
}

void LearnedMetricParams::validate() const {
  if (layers.empty()) throw ValidationError("network has no layers");
  if (layers.front().weights.cols() != kFeatureDim) {
    throw ValidationError("network input dimension must be 14");
  }
  if (layers.back().weights.rows() != 1) {
    throw ValidationError("network output dimension must be 1");
  }
  if (has_input_map() || input_offset.size() > 0) {
    if (input_transform.rows() != kFeatureDim || input_transform.cols() != kFeatureDim ||
        input_offset.size() != kFeatureDim) {
      throw ValidationError("input map must be 14 x 14 with a 14-vector offset");
    }
    if (!input_transform.allFinite() || !input_offset.allFinite()) {
      throw ValidationError("input map has non-finite values");
    }
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.bias.size() != layer.weights.rows()) {
      throw ValidationError("layer " + std::to_string(l) + " bias size mismatch");
    }
    if (l > 0 && layer.weights.cols() != layers[l - 1].weights.rows()) {
      throw ValidationError("layer " + std::to_string(l) + " input size mismatch");
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw ValidationError("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

std::size_t LearnedMetricParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

LearnedMetricParams LearnedMetricParams::zeros(const std::vector<int>& sizes) {
  if (sizes.size() < 2) throw ValidationError("network needs at least two layer sizes");
  LearnedMetricParams p;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] <= 0 || sizes[l + 1] <= 0) throw ValidationError("layer sizes must be positive");
    p.layers.push_back({Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]),
                        Eigen::VectorXd::Zero(sizes[l + 1])});
  }
  return p;
}

LearnedMetricParams LearnedMetricParams::initialize(std::uint64_t seed,
                                                    const std::vector<int>& sizes) {
  LearnedMetricParams p = zeros(sizes);
  SeedHasher h(seed);
  Rng rng(h.add(std::string_view("mlp-init")).digest());
  for (auto& layer : p.layers) {
    const auto fan_out = static_cast<double>(layer.weights.rows());
    const auto fan_in = static_cast<double>(layer.weights.cols());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    // Row-major fill order, matching the serialized layout.
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
        layer.weights(r, c) = rng.uniform(-limit, limit);
      }
    }
  }
  return p;
}

double forward(const LearnedMetricParams& params, const Eigen::VectorXd& x) {
  return forward_batch(params, x)(0);
}

Eigen::RowVectorXd forward_batch(const LearnedMetricParams& params, const Eigen::MatrixXd& x) {
  check_input(params, x.rows());
  auto act = run_layers(params, x);
  if (act.values.back().rows() != 1) throw ValidationError("network output dimension must be 1");
  return act.values.back().row(0);
}

double symmetric_disagreement(const LearnedMetricParams& params, const Pose& a, const Pose& b) {
  Eigen::MatrixXd x(kFeatureDim, 2);
  x.col(0) = featurize(a, b);
  x.col(1) = featurize(b, a);
  const Eigen::RowVectorXd out = forward_batch(params, x);
  return 0.5 * (out(0) + out(1));
}

void TrainingSet::validate() const {
  if (records.empty()) throw ValidationError("training set is empty");
  const std::size_t k = records.front().poses.size();
  if (k < 2) throw ValidationError("ensemble requires at least two estimators");
  if (target_estimator < 0 || static_cast<std::size_t>(target_estimator) >= k) {
    throw ValidationError("target estimator index out of range");
  }
  for (const auto& r : records) {
    if (r.poses.size() != k) throw ValidationError("records have differing ensemble sizes");
    if (!std::isfinite(r.target) || r.target < 0.0) {
      throw ValidationError("ADD targets must be finite and non-negative");
    }
  }
}

double loss(const LearnedMetricParams& params, std::span<const TrainingRecord> batch) {
  if (batch.empty()) return 0.0;
  const auto features = build_features(batch);
  const Eigen::VectorXd pred =
      record_predictions(forward_batch(params, features.x), features.offsets);
  double total = 0.0;
  for (std::size_t m = 0; m < batch.size(); ++m) {
    const double r = pred(static_cast<Eigen::Index>(m)) - batch[m].target;
    total += r * r;
  }
  return total;
}

LossGradient loss_gradient(const LearnedMetricParams& params,
                           std::span<const TrainingRecord> batch, double scale) {
  LossGradient out;
  out.grads.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    out.grads.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                         Eigen::VectorXd::Zero(l.bias.size())});
  }
  if (batch.empty()) return out;

  const auto features = build_features(batch);
  check_input(params, features.x.rows());
  const auto act = run_layers(params, features.x);
  const Eigen::RowVectorXd net_out = act.values.back().row(0);
  const Eigen::VectorXd pred = record_predictions(net_out, features.offsets);

  // dL/d(out_e) = 2 (pred_m - target_m) / n_m for every column e of record m.
  Eigen::MatrixXd upstream(1, net_out.size());
  for (std::size_t m = 0; m < batch.size(); ++m) {
    const auto mi = static_cast<Eigen::Index>(m);
    const double r = pred(mi) - batch[m].target;
    out.loss += r * r;
    const auto begin = features.offsets[m];
    const auto n = features.offsets[m + 1] - begin;
    upstream.block(0, begin, 1, n).setConstant(scale * 2.0 * r / static_cast<double>(n));
  }

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = act.values[l];
    out.grads[l].weights.noalias() = upstream * input.transpose();
    out.grads[l].bias = upstream.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd down = params.layers[l].weights.transpose() * upstream;
    // ReLU derivative on the previous layer's pre-activation (0 at the kink).
    down = down.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
    upstream = std::move(down);
  }
  return out;
}

TrainingResult train(const TrainingSet& data, const TrainingConfig& config,
                     std::string object_id) {
  data.validate();
  if (data.records.size() < 2) throw ValidationError("training needs at least two records");
  if (config.epochs <= 0 || config.batch_size <= 0 || config.learning_rate < 0.0 ||
      !std::isfinite(config.learning_rate)) {
    throw ValidationError("training config values must be positive");
  }

  LearnedMetricParams params = config.zero_init
                                   ? LearnedMetricParams::zeros(config.layer_sizes)
                                   : LearnedMetricParams::initialize(config.seed, config.layer_sizes);
  params.object_id = std::move(object_id);
  params.target_estimator = data.target_estimator;
  fit_input_map(params, data.records, config.normalization);
  params.validate();

  // SGD runs on standardized targets; the affine map is folded into the output layer.
  double mean = 0.0;
  for (const auto& r : data.records) mean += r.target;
  mean /= static_cast<double>(data.records.size());
  double var = 0.0;
  for (const auto& r : data.records) var += (r.target - mean) * (r.target - mean);
  var /= static_cast<double>(data.records.size());
  const double spread = std::sqrt(var);
  const bool constant = !(spread > 1e-12 * std::abs(mean));
  const double scale = constant ? 1.0 : spread;
  // With nothing to learn beyond the mean, start from the exact bias-only
  // solution; every residual is then zero and SGD leaves it in place.
  if (constant) {
    params.layers.back().weights.setZero();
    params.layers.back().bias.setZero();
  }
  std::vector<TrainingRecord> scaled = data.records;
  for (auto& r : scaled) r.target = (r.target - mean) / scale;
  const auto fold = [&](LearnedMetricParams p) {
    auto& out = p.layers.back();
    out.weights *= scale;
    out.bias = (out.bias * scale).array() + mean;
    return p;
  };

  TrainingResult result;
  result.initial_params = fold(params);
  const std::span<const TrainingRecord> all(data.records);
  result.initial_loss = loss(result.initial_params, all);
  if (!std::isfinite(result.initial_loss)) throw Error("training diverged at epoch 0");

  std::vector<TrainingRecord> batch;
  std::vector<std::size_t> order(scaled.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeedHasher h(config.seed);
  Rng shuffle_rng(h.add(std::string_view("mlp-shuffle")).digest());
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_index(i + 1)]);
    }
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(scaled[order[i]]);
      const double step = config.learning_rate / static_cast<double>(batch.size());
      if (step == 0.0) continue;
      auto g = loss_gradient(params, batch);
      if (!std::isfinite(g.loss)) {
        throw Error("training diverged at epoch " + std::to_string(epoch));
      }
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        params.layers[l].weights -= step * g.grads[l].weights;
        params.layers[l].bias -= step * g.grads[l].bias;
      }
    }
  }

  result.params = fold(std::move(params));
  result.final_loss = loss(result.params, all);
  if (!std::isfinite(result.final_loss)) {
    throw Error("training diverged at epoch " + std::to_string(config.epochs));
  }
  return result;
}

}  // namespace poseuq
