#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poseuq/learned_metric.hpp"
#include "poseuq/simulation.hpp"

namespace poseuq {

inline constexpr int kDatasetFormatVersion = 1;

/// In-memory form of a dataset file: the scenario (which carries the estimator
/// and object registries) and the frame records.
struct Dataset {
  ScenarioConfig scenario;
  std::vector<FrameRecord> records;

  // Registry membership, record order, and per-record shape checks.
  void validate() const;
  bool operator==(const Dataset&) const = default;
};

using Json = nlohmann::ordered_json;

Json to_json(const ScenarioConfig& cfg);
// Missing fields keep their defaults; wrong types or values throw
// ValidationError naming the field path.
ScenarioConfig scenario_from_json(const Json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

Json to_json(const FrameRecord& rec);
FrameRecord frame_record_from_json(const Json& j);

/// JSON-Lines text: a header line then one record per line. Numbers use the
/// shortest representation that round-trips exactly, so serialize(parse(s))
/// reproduces s byte for byte.
std::string serialize_dataset(const Dataset& dataset);
Dataset parse_dataset(const std::string& text);
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Learned metric file: network weights plus the provenance needed to
/// reproduce and evaluate it.
struct LearnedMetricFile {
  LearnedMetricParams params;
  std::string target_estimator_id;
  std::vector<std::string> ensemble;
  TrainingConfig config;
  double split = 1.0 / 3.0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> training_frames;  // (sequence, frame)
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double heldout_loss = 0.0;
  bool operator==(const LearnedMetricFile&) const = default;
};

Json to_json(const LearnedMetricFile& file);
LearnedMetricFile learned_metric_from_json(const Json& j);
LearnedMetricFile load_learned_metric(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace poseuq
