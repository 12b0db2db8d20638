#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "poseuq/geometry.hpp"

namespace poseuq {

inline constexpr int kFeatureDim = 14;
using FeatureVec = Eigen::Matrix<double, kFeatureDim, 1>;

/// [a.w a.x a.y a.z, a.t, b.w b.x b.y b.z, b.t] with canonical quaternions.
FeatureVec featurize(const Pose& a, const Pose& b);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  bool operator==(const DenseLayer& other) const {
    return weights.rows() == other.weights.rows() &&
           weights.cols() == other.weights.cols() && weights == other.weights &&
           bias.size() == other.bias.size() && bias == other.bias;
  }
};

/// Weights of one per-(object, estimator) disagreement regressor. Hidden
/// layers use ReLU, the output layer is linear. Features pass through a fixed
/// affine map x' = input_transform * (x - input_offset) before the first
/// layer; empty members mean the identity.
struct LearnedMetricParams {
  std::string object_id;
  int target_estimator = 0;
  std::vector<DenseLayer> layers;
  Eigen::MatrixXd input_transform;  // 14 x 14 or empty
  Eigen::VectorXd input_offset;     // 14 or empty

  static const std::vector<int>& default_layer_sizes();  // 14, 64, 64, 64, 1

  std::vector<int> layer_sizes() const;
  // Throws ValidationError on shape mismatch or non-finite parameters.
  void validate() const;
  std::size_t parameter_count() const;

  static LearnedMetricParams zeros(const std::vector<int>& sizes = default_layer_sizes());
  // Glorot-uniform weights from the seeded generator, zero biases.
  static LearnedMetricParams initialize(std::uint64_t seed,
                                        const std::vector<int>& sizes = default_layer_sizes());

  bool has_input_map() const { return input_transform.size() > 0; }
  Eigen::MatrixXd map_inputs(const Eigen::MatrixXd& x) const;

  bool operator==(const LearnedMetricParams& other) const;
};

/// Raw (unsymmetrized) network output for one feature vector.
double forward(const LearnedMetricParams& params, const Eigen::VectorXd& x);

/// Column-wise outputs for a 14 x N feature matrix.
Eigen::RowVectorXd forward_batch(const LearnedMetricParams& params, const Eigen::MatrixXd& x);

/// 0.5 * (net(a, b) + net(b, a)).
double symmetric_disagreement(const LearnedMetricParams& params, const Pose& a, const Pose& b);

/// One labeled observation: the K ensemble predictions and the ADD error of
/// the target estimator against ground truth.
struct TrainingRecord {
  std::vector<Pose> poses;
  double target = 0.0;
};

struct TrainingSet {
  std::vector<TrainingRecord> records;
  int target_estimator = 0;
  // Throws ValidationError if empty, K < 2, K varies, or a target is invalid.
  void validate() const;
};

/// Sum over records of (mean pairwise symmetric disagreement - target)^2.
double loss(const LearnedMetricParams& params, std::span<const TrainingRecord> batch);

struct LossGradient {
  double loss = 0.0;
  std::vector<DenseLayer> grads;  // same shapes as params.layers
};

/// Loss and its analytic gradient, scaled by `scale` (the loss itself is
/// returned unscaled).
LossGradient loss_gradient(const LearnedMetricParams& params,
                           std::span<const TrainingRecord> batch, double scale = 1.0);

enum class InputNormalization {
  kNone,         // raw features
  kStandardize,  // per-feature zero mean, unit variance
  kWhiten,       // zero mean, identity covariance (ZCA)
  kPair,         // per-pose mean and difference, each standardized
};

std::string_view to_string(InputNormalization n);
std::optional<InputNormalization> parse_input_normalization(std::string_view name);

/// Fixed input map estimated from the features of every pair (both argument
/// orders) of every training record.
void fit_input_map(LearnedMetricParams& params, std::span<const TrainingRecord> records,
                   InputNormalization mode);

struct TrainingConfig {
  int epochs = 500;
  double learning_rate = 1e-3;
  int batch_size = 32;
  std::uint64_t seed = 0;
  InputNormalization normalization = InputNormalization::kPair;
  bool zero_init = false;
  std::vector<int> layer_sizes = LearnedMetricParams::default_layer_sizes();
  bool operator==(const TrainingConfig&) const = default;
};

struct TrainingResult {
  LearnedMetricParams params;
  LearnedMetricParams initial_params;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

/// Minibatch SGD on the ensemble loss. Initialization and per-epoch shuffles
/// come from streams derived from config.seed, so a run is reproducible bit
/// for bit. Minibatch gradients are averaged over the batch. Throws Error
/// ("training diverged at epoch N") on a non-finite loss.
TrainingResult train(const TrainingSet& data, const TrainingConfig& config,
                     std::string object_id = {});

}  // namespace poseuq
