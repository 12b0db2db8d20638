#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "poseuq/baselines.hpp"
#include "poseuq/dataset.hpp"
#include "poseuq/ensemble_uq.hpp"
#include "poseuq/learned_metric.hpp"

namespace poseuq {

/// Fractional ranks starting at 1; tied values share the mean of their ranks.
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman's rho: Pearson correlation of average ranks. Throws
/// ValidationError on length mismatch, n < 2, or "zero rank variance".
double spearman(std::span<const double> a, std::span<const double> b);

/// Area under the accuracy-vs-threshold step curve on [0, threshold],
/// normalized to [0, 1]. Infinite errors (missed detections) count as
/// failures at every threshold.
double add_auc(std::span<const double> errors, double threshold = 0.10);

/// Index of the smallest value; ties go to the lowest index. Non-finite
/// values are unusable. Throws ValidationError("no usable frame") if none is
/// finite.
std::size_t select_view(std::span<const double> uq);

enum class UqMethod { kConfidence, kGuapo, kTranslational, kRotational, kAdd, kLearned };

std::string_view to_string(UqMethod m);
std::optional<UqMethod> parse_uq_method(std::string_view name);
std::vector<UqMethod> all_uq_methods();

struct FrameKey {
  std::uint32_t sequence_id = 0;
  std::uint32_t frame_index = 0;
  std::string object_id;
  auto operator<=>(const FrameKey&) const = default;
};

/// Everything needed to turn a FrameRecord into UQ values and errors.
class UqEvaluator {
 public:
  struct Options {
    std::vector<std::string> ensemble;  // estimator ids; empty = first two in the registry
    GuapoOptions guapo;
    std::uint64_t seed = 0;  // GUAPO stream seed
  };

  UqEvaluator(const Dataset& dataset, Options options);

  // Learned parameters for (object, target estimator id).
  void add_learned(const std::string& estimator_id, LearnedMetricParams params);
  bool has_learned(const std::string& object_id, const std::string& estimator_id) const;

  const std::vector<std::size_t>& ensemble() const { return ensemble_; }
  GuapoReduction guapo_reduction() const { return options_.guapo.reduction; }
  std::size_t estimator_index(const std::string& id) const;
  const ObjectModel& object(const std::string& id) const;

  // Undefined (nullopt) when a required detection is missing.
  std::optional<double> add_error(const FrameRecord& rec, std::size_t estimator) const;
  std::optional<double> uq(const FrameRecord& rec, UqMethod method, std::size_t estimator,
                           GuapoReduction reduction) const;
  std::optional<double> uq(const FrameRecord& rec, UqMethod method, std::size_t estimator) const {
    return uq(rec, method, estimator, options_.guapo.reduction);
  }

 private:
  const Dataset& dataset_;
  Options options_;
  std::vector<std::size_t> ensemble_;
  std::map<std::string, ObjectModel> objects_;
  std::map<std::pair<std::string, std::string>, DisagreementMetric> learned_;
};

/// One (estimator, method) row of a correlation table. `method` is the method
/// name, with a "[translation_std]" style suffix for the alternate GUAPO
/// reduction.
struct CorrelationRow {
  std::string estimator_id;
  std::string method;
  std::map<std::string, double> rho_by_object;
  std::map<std::string, std::size_t> frames_by_object;
  double mean = 0.0;
  double stddev = 0.0;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  std::vector<std::string> warnings;
  const CorrelationRow* find(const std::string& estimator_id, const std::string& method) const;
};

struct CorrelationOptions {
  std::vector<UqMethod> methods;
  std::vector<std::string> estimators;  // target estimators; empty = ensemble members
  std::set<FrameKey> excluded_frames;   // e.g. training frames of learned metrics
  std::size_t min_frames = 5;
  bool report_alternate_guapo = true;
};

CorrelationReport correlation_analysis(const Dataset& dataset, const UqEvaluator& evaluator,
                                       const CorrelationOptions& options);

struct SelectionEntry {
  std::string object_id;
  std::uint32_t sequence_id = 0;
  std::uint32_t frame_index = 0;
  double add_error = 0.0;  // meters
  bool fallback = false;   // method UQ undefined on every frame
};

struct SelectionRow {
  std::string estimator_id;
  std::string method;  // a UqMethod name, "oracle" or "random"
  std::vector<SelectionEntry> entries;
  std::map<std::string, double> mean_by_object;
  double mean = 0.0;    // mean over objects of per-object means
  double stddev = 0.0;  // std over objects of per-object means
};

struct SelectionReport {
  std::vector<SelectionRow> rows;
  std::vector<std::string> warnings;
  const SelectionRow* find(const std::string& estimator_id, const std::string& method) const;
};

struct SelectionOptions {
  std::vector<UqMethod> methods;
  std::string estimator;     // target estimator; empty = first ensemble member
  std::uint64_t seed = 0;    // random reference
};

/// Greedy camera-perspective selection per (object, sequence): the frame of
/// least UQ among frames where the target estimator detected the object, plus
/// the ground-truth oracle and a uniform-random reference.
SelectionReport select_views(const Dataset& dataset, const UqEvaluator& evaluator,
                             const SelectionOptions& options);

double mean(std::span<const double> v);
// Sample standard deviation; 0 for fewer than two values.
double sample_stddev(std::span<const double> v);

}  // namespace poseuq
