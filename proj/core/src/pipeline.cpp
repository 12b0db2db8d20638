#include "poseuq/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "poseuq/errors.hpp"
#include "poseuq/random.hpp"

namespace poseuq {

ObjectSplit build_object_split(const Dataset& dataset, const UqEvaluator& evaluator,
                               const std::string& object_id, const std::string& estimator_id,
                               double split, std::uint64_t seed) {
  if (!(split > 0.0 && split < 1.0)) throw ValidationError("split must lie in (0, 1)");
  const std::size_t est = evaluator.estimator_index(estimator_id);
  const auto& ens = evaluator.ensemble();
  const auto pos = std::find(ens.begin(), ens.end(), est);
  if (pos == ens.end()) {
    throw ValidationError("estimator '" + estimator_id + "' is not an ensemble member");
  }
  const int k = static_cast<int>(pos - ens.begin());

  std::vector<const FrameRecord*> usable;
  std::vector<TrainingRecord> records;
  for (const auto& rec : dataset.records) {
    if (rec.object_id != object_id) continue;
    TrainingRecord tr;
    bool complete = true;
    for (std::size_t e : ens) {
      const auto& obs = rec.estimates.at(e);
      if (!obs.detected()) {
        complete = false;
        break;
      }
      tr.poses.push_back(obs.detection->pose);
    }
    if (!complete) continue;
    tr.target = *evaluator.add_error(rec, est);
    usable.push_back(&rec);
    records.push_back(std::move(tr));
  }

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = derive_rng(seed, 0, 0, object_id, "", "split");
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(order.size())));

  ObjectSplit out;
  out.train.target_estimator = k;
  out.heldout.target_estimator = k;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto* rec = usable[order[i]];
    FrameKey key{rec->sequence_id, rec->frame_index, rec->object_id};
    if (i < n_train) {
      out.train.records.push_back(std::move(records[order[i]]));
      out.train_frames.push_back(std::move(key));
    } else {
      out.heldout.records.push_back(std::move(records[order[i]]));
      out.heldout_frames.push_back(std::move(key));
    }
  }
  std::sort(out.train_frames.begin(), out.train_frames.end());
  std::sort(out.heldout_frames.begin(), out.heldout_frames.end());
  return out;
}

LearnedMetricFile train_learned_metric(const Dataset& dataset, const UqEvaluator& evaluator,
                                       const std::string& object_id,
                                       const std::string& estimator_id, double split,
                                       const TrainingConfig& config) {
  auto data = build_object_split(dataset, evaluator, object_id, estimator_id, split, config.seed);
  const std::size_t usable = data.train.records.size() + data.heldout.records.size();
  if (usable < kMinTrainingFrames || data.train.records.size() < 2) {
    throw ValidationError("object '" + object_id + "' has " + std::to_string(usable) +
                          " usable frames; at least " + std::to_string(kMinTrainingFrames) +
                          " are required");
  }
  auto result = train(data.train, config, object_id);

  LearnedMetricFile file;
  file.params = std::move(result.params);
  file.target_estimator_id = estimator_id;
  for (std::size_t e : evaluator.ensemble()) {
    file.ensemble.push_back(dataset.scenario.estimators[e].id);
  }
  file.config = config;
  file.split = split;
  for (const auto& key : data.train_frames) {
    file.training_frames.emplace_back(key.sequence_id, key.frame_index);
  }
  file.initial_loss = result.initial_loss;
  file.final_loss = result.final_loss;
  file.heldout_loss = loss(file.params, data.heldout.records);
  return file;
}

}  // namespace poseuq
