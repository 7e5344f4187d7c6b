#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plume/detector/training.hpp"
#include "plume/evaluation.hpp"
#include "plume/raster.hpp"

namespace plume {

/// Schema violation; the message names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checks a pipeline config against the documented schema.
void validate_config(const nlohmann::json& config);

/// Lowercase hex SHA-256.
std::string sha256_hex(const std::string& data);

/// Cache key of a stage: hash of its name, canonical parameters, seed, and upstream keys.
std::string stage_key(const std::string& stage, const nlohmann::json& params, uint64_t seed,
                      const std::vector<std::string>& upstream_keys);

const std::vector<std::string>& pipeline_stage_order();

// Shared by the pipeline stages and the single-step CLI commands. Missing keys take defaults.
ModelSpec model_spec_from_json(const nlohmann::json& train_section, int tile_size, uint64_t seed);
TrainConfig train_config_from_json(const nlohmann::json& train_section, uint64_t seed);

/// Campaign BGE statistics plus per-scene medians and triage flags.
nlohmann::json bge_report(const std::vector<std::string>& scene_ids, const std::vector<Raster>& cmfs,
                          std::optional<double> threshold_override);

/// Pooled instance metrics and the four strata tables over a set of scene reports.
nlohmann::json eval_summary(const std::vector<MetricReport>& reports);

struct StageStatus {
  std::string name;
  std::string key;
  std::string status;  // ran | cached | error | skipped
  std::string dir;
  double seconds = 0.0;
  std::string message;
};

struct PipelineReport {
  std::vector<StageStatus> stages;
  bool ok = true;

  nlohmann::json to_json() const;
};

/// Runs the declared stages under `workdir`, reusing any stage whose key already has a completed
/// cache entry, and writes `workdir/report.json`. Stage errors are recorded, not thrown.
PipelineReport pipeline_run(const nlohmann::json& config, const std::filesystem::path& workdir,
                            std::optional<uint64_t> seed_override = std::nullopt);

}  // namespace plume
