#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poseuq/dataset.hpp"
#include "poseuq/evaluation.hpp"
#include "poseuq/learned_metric.hpp"

namespace poseuq {

/// Frames of one object on which every ensemble member detected it, split
/// into training and held-out parts by a seeded shuffle. The split depends
/// only on (seed, object), so every estimator of an object shares it.
struct ObjectSplit {
  TrainingSet train;
  TrainingSet heldout;
  std::vector<FrameKey> train_frames;
  std::vector<FrameKey> heldout_frames;
};

ObjectSplit build_object_split(const Dataset& dataset, const UqEvaluator& evaluator,
                               const std::string& object_id, const std::string& estimator_id,
                               double split, std::uint64_t seed);

/// Minimum usable frames for training a learned metric of one object.
inline constexpr std::size_t kMinTrainingFrames = 6;

/// Builds the split and trains f_k for (object, estimator). Throws
/// ValidationError when the estimator is not an ensemble member or fewer than
/// kMinTrainingFrames frames are usable.
LearnedMetricFile train_learned_metric(const Dataset& dataset, const UqEvaluator& evaluator,
                                       const std::string& object_id,
                                       const std::string& estimator_id, double split,
                                       const TrainingConfig& config);

}  // namespace poseuq
