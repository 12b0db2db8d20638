#include "poseuq/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "poseuq/ensemble_uq.hpp"
#include "poseuq/errors.hpp"
#include "poseuq/random.hpp"

namespace poseuq {

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share the mean of ranks i+1..j+1.
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman inputs differ in length");
  if (a.size() < 2) throw ValidationError("spearman needs at least two values");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) || std::isnan(b[i])) throw ValidationError("spearman input is NaN");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double ma = mean(ra);
  const double mb = mean(rb);
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) throw ValidationError("zero rank variance");
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double add_auc(std::span<const double> errors, double threshold) {
  if (errors.empty()) throw ValidationError("add_auc needs at least one error");
  if (!(threshold > 0.0) || !std::isfinite(threshold)) {
    throw ValidationError("add_auc threshold must be positive");
  }
  std::vector<double> sorted(errors.begin(), errors.end());
  for (double e : sorted) {
    if (std::isnan(e) || e < 0.0) throw ValidationError("ADD errors must be >= 0");
  }
  std::sort(sorted.begin(), sorted.end());
  // accuracy(t) = #{e < t} / n is a step function; its integral over [0, T]
  // is sum over e < T of (T - e) / n.
  double area = 0.0;
  for (double e : sorted) {
    if (e >= threshold) break;
    area += threshold - e;
  }
  return area / (static_cast<double>(sorted.size()) * threshold);
}

std::size_t select_view(std::span<const double> uq) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < uq.size(); ++i) {
    if (!std::isfinite(uq[i])) continue;
    if (!best || uq[i] < uq[*best]) best = i;
  }
  if (!best) throw ValidationError("no usable frame");
  return *best;
}

std::string_view to_string(UqMethod m) {
  switch (m) {
    case UqMethod::kConfidence: return "confidence";
    case UqMethod::kGuapo: return "guapo";
    case UqMethod::kTranslational: return "d_translational";
    case UqMethod::kRotational: return "d_rotational";
    case UqMethod::kAdd: return "d_add";
    case UqMethod::kLearned: return "d_learned";
  }
  return "unknown";
}

std::optional<UqMethod> parse_uq_method(std::string_view name) {
  for (auto m : all_uq_methods()) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::vector<UqMethod> all_uq_methods() {
  return {UqMethod::kConfidence, UqMethod::kGuapo,    UqMethod::kTranslational,
          UqMethod::kRotational, UqMethod::kAdd,      UqMethod::kLearned};
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// ---------------------------------------------------------------------------

UqEvaluator::UqEvaluator(const Dataset& dataset, Options options)
    : dataset_(dataset), options_(std::move(options)) {
  const auto& registry = dataset_.scenario.estimators;
  if (options_.ensemble.empty()) {
    if (registry.size() < 2) throw ValidationError("ensemble requires at least two estimators");
    ensemble_ = {0, 1};
  } else {
    for (const auto& id : options_.ensemble) ensemble_.push_back(estimator_index(id));
    std::set<std::size_t> unique(ensemble_.begin(), ensemble_.end());
    if (unique.size() != ensemble_.size()) throw ValidationError("ensemble lists an estimator twice");
    if (ensemble_.size() < 2) throw ValidationError("ensemble requires at least two estimators");
  }
  for (const auto& spec : dataset_.scenario.objects) {
    objects_.emplace(spec.id, load_object_model(spec));
  }
}

std::size_t UqEvaluator::estimator_index(const std::string& id) const {
  const auto& registry = dataset_.scenario.estimators;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    if (registry[i].id == id) return i;
  }
  throw ValidationError("unknown estimator '" + id + "'");
}

const ObjectModel& UqEvaluator::object(const std::string& id) const {
  auto it = objects_.find(id);
  if (it == objects_.end()) throw ValidationError("unknown object '" + id + "'");
  return it->second;
}

void UqEvaluator::add_learned(const std::string& estimator_id, LearnedMetricParams params) {
  estimator_index(estimator_id);
  auto key = std::make_pair(params.object_id, estimator_id);
  learned_.insert_or_assign(std::move(key), DisagreementMetric::learned(std::move(params)));
}

bool UqEvaluator::has_learned(const std::string& object_id, const std::string& estimator_id) const {
  return learned_.count({object_id, estimator_id}) > 0;
}

std::optional<double> UqEvaluator::add_error(const FrameRecord& rec, std::size_t estimator) const {
  const auto& obs = rec.estimates.at(estimator);
  if (!obs.detected()) return std::nullopt;
  return add_distance(obs.detection->pose, rec.ground_truth, object(rec.object_id).cloud);
}

std::optional<double> UqEvaluator::uq(const FrameRecord& rec, UqMethod method,
                                      std::size_t estimator, GuapoReduction reduction) const {
  const auto& target = rec.estimates.at(estimator);
  switch (method) {
    case UqMethod::kConfidence:
      if (!target.detected()) return std::nullopt;
      return confidence_uq(target.detection->meta);
    case UqMethod::kGuapo: {
      if (!target.detected()) return std::nullopt;
      const auto& model = object(rec.object_id);
      const std::uint64_t seed =
          derive_rng(options_.seed, rec.sequence_id, rec.frame_index, rec.object_id,
                     target.estimator_id, "guapo")
              .next_u64();
      GuapoOptions opts = options_.guapo;
      opts.reduction = reduction;
      try {
        return guapo_uq(target.detection->keypoints, target.detection->meta,
                        model.keypoint_model, rec.intrinsics, opts, seed, &model.cloud);
      } catch (const ValidationError&) {
        return std::nullopt;
      }
    }
    default:
      break;
  }

  std::vector<Pose> poses;
  for (std::size_t e : ensemble_) {
    const auto& obs = rec.estimates.at(e);
    if (!obs.detected()) return std::nullopt;
    poses.push_back(obs.detection->pose);
  }
  switch (method) {
    case UqMethod::kTranslational:
      return ensemble_disagreement(DisagreementMetric::translational(), poses);
    case UqMethod::kRotational:
      return ensemble_disagreement(DisagreementMetric::rotational(), poses);
    case UqMethod::kAdd:
      return ensemble_disagreement(DisagreementMetric::add(object(rec.object_id).cloud), poses);
    case UqMethod::kLearned: {
      auto it = learned_.find({rec.object_id, target.estimator_id});
      if (it == learned_.end()) return std::nullopt;
      return ensemble_disagreement(it->second, poses);
    }
    default:
      break;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> target_estimators(const UqEvaluator& ev,
                                           const std::vector<std::string>& ids) {
  if (ids.empty()) return ev.ensemble();
  std::vector<std::size_t> out;
  for (const auto& id : ids) out.push_back(ev.estimator_index(id));
  return out;
}

void finalize_row(std::map<std::string, double>& per_object, double& m, double& s) {
  std::vector<double> values;
  for (const auto& [_, v] : per_object) values.push_back(v);
  m = mean(values);
  s = sample_stddev(values);
}

}  // namespace

const CorrelationRow* CorrelationReport::find(const std::string& estimator_id,
                                              const std::string& method) const {
  for (const auto& r : rows) {
    if (r.estimator_id == estimator_id && r.method == method) return &r;
  }
  return nullptr;
}

CorrelationReport correlation_analysis(const Dataset& dataset, const UqEvaluator& evaluator,
                                       const CorrelationOptions& options) {
  CorrelationReport report;
  const auto targets = target_estimators(evaluator, options.estimators);

  struct Variant {
    UqMethod method;
    GuapoReduction reduction;
    std::string name;
  };
  std::vector<Variant> variants;
  for (auto m : options.methods) {
    const GuapoReduction primary = evaluator.guapo_reduction();
    variants.push_back({m, primary, std::string(to_string(m))});
    if (m == UqMethod::kGuapo && options.report_alternate_guapo) {
      // The other reduction is reported alongside the configured one.
      const GuapoReduction alt = primary == GuapoReduction::kRmsAdd
                                     ? GuapoReduction::kTranslationStd
                                     : GuapoReduction::kRmsAdd;
      variants.push_back({m, alt, "guapo[" + std::string(to_string(alt)) + "]"});
    }
  }

  for (std::size_t est : targets) {
    const std::string& est_id = dataset.scenario.estimators[est].id;
    for (const auto& variant : variants) {
      if (variant.method == UqMethod::kLearned) {
        bool any = false;
        for (const auto& spec : dataset.scenario.objects) {
          any = any || evaluator.has_learned(spec.id, est_id);
        }
        if (!any) {
          throw ValidationError("d_learned requested but no learned parameters for estimator '" +
                                est_id + "'");
        }
      }
      std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> pairs;
      for (const auto& rec : dataset.records) {
        if (options.excluded_frames.count({rec.sequence_id, rec.frame_index, rec.object_id})) {
          continue;
        }
        const auto err = evaluator.add_error(rec, est);
        if (!err) continue;
        const auto u = evaluator.uq(rec, variant.method, est, variant.reduction);
        if (!u) continue;
        auto& [us, es] = pairs[rec.object_id];
        us.push_back(*u);
        es.push_back(*err);
      }

      CorrelationRow row{est_id, variant.name, {}, {}, 0.0, 0.0};
      for (const auto& spec : dataset.scenario.objects) {
        auto it = pairs.find(spec.id);
        const std::size_t n = it == pairs.end() ? 0 : it->second.first.size();
        const std::string tag = est_id + "/" + variant.name + "/" + spec.id;
        if (variant.method == UqMethod::kLearned && !evaluator.has_learned(spec.id, est_id)) {
          report.warnings.push_back(tag + ": no learned parameters; excluded");
          continue;
        }
        if (n < options.min_frames) {
          report.warnings.push_back(tag + ": only " + std::to_string(n) +
                                    " usable frames; excluded");
          continue;
        }
        try {
          row.rho_by_object[spec.id] = spearman(it->second.first, it->second.second);
          row.frames_by_object[spec.id] = n;
        } catch (const ValidationError& e) {
          report.warnings.push_back(tag + ": " + e.what() + "; excluded");
        }
      }
      finalize_row(row.rho_by_object, row.mean, row.stddev);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

const SelectionRow* SelectionReport::find(const std::string& estimator_id,
                                          const std::string& method) const {
  for (const auto& r : rows) {
    if (r.estimator_id == estimator_id && r.method == method) return &r;
  }
  return nullptr;
}

SelectionReport select_views(const Dataset& dataset, const UqEvaluator& evaluator,
                             const SelectionOptions& options) {
  SelectionReport report;
  const std::size_t est = options.estimator.empty() ? evaluator.ensemble().front()
                                                    : evaluator.estimator_index(options.estimator);
  const std::string& est_id = dataset.scenario.estimators[est].id;

  // (object, sequence) -> record pointers in frame order.
  std::map<std::pair<std::string, std::uint32_t>, std::vector<const FrameRecord*>> groups;
  for (const auto& rec : dataset.records) groups[{rec.object_id, rec.sequence_id}].push_back(&rec);

  std::vector<std::string> names{"oracle", "random"};
  for (auto m : options.methods) names.emplace_back(to_string(m));
  std::vector<SelectionRow> rows;
  for (const auto& name : names) rows.push_back({est_id, name, {}, {}, 0.0, 0.0});

  for (const auto& [key, frames] : groups) {
    // Candidates: frames where the target estimator detected the object.
    std::vector<const FrameRecord*> usable;
    std::vector<double> errors;
    for (const auto* rec : frames) {
      if (auto e = evaluator.add_error(*rec, est)) {
        usable.push_back(rec);
        errors.push_back(*e);
      }
    }
    const std::string tag = key.first + "/seq" + std::to_string(key.second);
    if (usable.empty()) {
      report.warnings.push_back(tag + ": target estimator never detected the object; skipped");
      continue;
    }
    auto push = [&](SelectionRow& row, std::size_t idx, bool fallback) {
      row.entries.push_back({key.first, key.second, usable[idx]->frame_index, errors[idx], fallback});
    };

    push(rows[0], select_view(errors), false);
    Rng rng = derive_rng(options.seed, key.second, 0, key.first, est_id, "random-view");
    push(rows[1], rng.uniform_index(usable.size()), false);

    for (std::size_t m = 0; m < options.methods.size(); ++m) {
      std::vector<double> values;
      for (const auto* rec : usable) {
        values.push_back(evaluator.uq(*rec, options.methods[m], est)
                             .value_or(std::numeric_limits<double>::infinity()));
      }
      try {
        push(rows[m + 2], select_view(values), false);
      } catch (const ValidationError&) {
        // Undefined UQ everywhere ranks every frame as +inf; the tie rule picks the first.
        push(rows[m + 2], 0, true);
        report.warnings.push_back(tag + "/" + names[m + 2] +
                                  ": UQ undefined on every frame; first usable frame selected");
      }
    }
  }

  for (auto& row : rows) {
    std::map<std::string, std::vector<double>> per_object;
    for (const auto& e : row.entries) per_object[e.object_id].push_back(e.add_error);
    for (const auto& [obj, v] : per_object) row.mean_by_object[obj] = mean(v);
    finalize_row(row.mean_by_object, row.mean, row.stddev);
  }
  report.rows = std::move(rows);
  return report;
}

}  // namespace poseuq
