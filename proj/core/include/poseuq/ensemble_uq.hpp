#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "poseuq/geometry.hpp"
#include "poseuq/learned_metric.hpp"

namespace poseuq {

enum class MetricKind { kTranslational, kRotational, kAdd, kLearned };

std::string_view to_string(MetricKind kind);
// Accepts "translational", "rotational", "add", "learned".
std::optional<MetricKind> parse_metric_kind(std::string_view name);

/// Pairwise distance f between two pose hypotheses. Translational and ADD
/// values are meters, rotational values are degrees, learned values are in
/// the unit of their training target (meters of ADD).
class DisagreementMetric {
 public:
  static DisagreementMetric translational();
  static DisagreementMetric rotational();
  static DisagreementMetric add(PointCloud cloud);
  static DisagreementMetric learned(LearnedMetricParams params);

  MetricKind kind() const { return kind_; }
  // Throws ValidationError if the payload for the kind is missing.
  void validate() const;

  double operator()(const Pose& a, const Pose& b) const;

 private:
  DisagreementMetric(MetricKind kind) : kind_(kind) {}

  MetricKind kind_;
  std::shared_ptr<const PointCloud> cloud_;
  std::shared_ptr<const LearnedMetricParams> params_;
};

struct EnsemblePrediction {
  std::vector<Pose> poses;
  std::vector<std::string> estimator_ids;
};

double pair_disagreement(const DisagreementMetric& metric, const Pose& a, const Pose& b);

/// Mean of f over all C(K, 2) pairs i < j. Throws ValidationError
/// ("ensemble requires at least two estimators") for K < 2.
double ensemble_disagreement(const DisagreementMetric& metric, const EnsemblePrediction& pred);
double ensemble_disagreement(const DisagreementMetric& metric, std::span<const Pose> poses);

}  // namespace poseuq
