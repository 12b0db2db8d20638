#include "poseuq/ensemble_uq.hpp"

#include "poseuq/errors.hpp"

namespace poseuq {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kTranslational: return "translational";
    case MetricKind::kRotational: return "rotational";
    case MetricKind::kAdd: return "add";
    case MetricKind::kLearned: return "learned";
  }
  return "unknown";
}

std::optional<MetricKind> parse_metric_kind(std::string_view name) {
  if (name == "translational") return MetricKind::kTranslational;
  if (name == "rotational") return MetricKind::kRotational;
  if (name == "add") return MetricKind::kAdd;
  if (name == "learned") return MetricKind::kLearned;
  return std::nullopt;
}

DisagreementMetric DisagreementMetric::translational() {
  return {MetricKind::kTranslational};
}

DisagreementMetric DisagreementMetric::rotational() { return {MetricKind::kRotational}; }

DisagreementMetric DisagreementMetric::add(PointCloud cloud) {
  DisagreementMetric m(MetricKind::kAdd);
  m.cloud_ = std::make_shared<const PointCloud>(std::move(cloud));
  return m;
}

DisagreementMetric DisagreementMetric::learned(LearnedMetricParams params) {
  params.validate();
  DisagreementMetric m(MetricKind::kLearned);
  m.params_ = std::make_shared<const LearnedMetricParams>(std::move(params));
  return m;
}

void DisagreementMetric::validate() const {
  if (kind_ == MetricKind::kAdd && !cloud_) {
    throw ValidationError("add disagreement requires a point cloud");
  }
  if (kind_ == MetricKind::kLearned && !params_) {
    throw ValidationError("learned disagreement requires network parameters");
  }
}

double DisagreementMetric::operator()(const Pose& a, const Pose& b) const {
  validate();
  switch (kind_) {
    case MetricKind::kTranslational: return translation_distance(a, b);
    case MetricKind::kRotational: return rotation_angle(a, b);
    case MetricKind::kAdd: return add_distance(a, b, *cloud_);
    case MetricKind::kLearned: return symmetric_disagreement(*params_, a, b);
  }
  throw ValidationError("unknown disagreement kind");
}

double pair_disagreement(const DisagreementMetric& metric, const Pose& a, const Pose& b) {
  return metric(a, b);
}

double ensemble_disagreement(const DisagreementMetric& metric, std::span<const Pose> poses) {
  const std::size_t k = poses.size();
  if (k < 2) throw ValidationError("ensemble requires at least two estimators");
  metric.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) sum += metric(poses[i], poses[j]);
  }
  return sum / static_cast<double>(k * (k - 1) / 2);
}

double ensemble_disagreement(const DisagreementMetric& metric, const EnsemblePrediction& pred) {
  if (!pred.estimator_ids.empty() && pred.estimator_ids.size() != pred.poses.size()) {
    throw ValidationError("estimator id count does not match pose count");
  }
  return ensemble_disagreement(metric, std::span<const Pose>(pred.poses));
}

}  // namespace poseuq
