#pragma once

// Files: experiment configs, cost tables, stage models and pipeline
// descriptions as versioned JSON; tabular results as CSV.

#include "nnadc/dse.hpp"
#include "nnadc/experiment.hpp"
#include "nnadc/pipeline.hpp"
#include "nnadc/stage.hpp"
#include "nnadc/trainer.hpp"

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace nnadc {

using Json = nlohmann::json;

inline constexpr int file_schema_version = 1;

std::string fnv1a64_hex(std::string_view bytes);
/// Hash of the compact dump; object keys are sorted, so equal content hashes
/// equally.
std::string json_hash(const Json &j);

/// Parse failures and missing files are ConfigError.
Json read_config_json(const std::string &path);
/// Parse failures and missing files are ModelReferenceError.
Json read_model_json(const std::string &path);
void write_text_file(const std::string &path, const std::string &text);

/// Keys present in `j` override `base`. Seed and precision are not part of
/// the schema; they come from the master seed and the grid.
TrainConfig train_config_from_json(const Json &j, const std::string &path,
                                   const TrainConfig &base = {});
Json to_json(const TrainConfig &c, bool with_identity = false);

CostTable cost_table_from_json(const Json &j, const std::string &path = "cost_table");
Json to_json(const CostTable &t);
CostTable load_cost_table(const std::string &file);

/// Relative cost-table paths resolve against `base_dir`.
ExperimentConfig experiment_from_json(const Json &j, const std::string &base_dir = ".");
Json to_json(const ExperimentConfig &cfg);
ExperimentConfig load_experiment(const std::string &file);
/// Hash of the canonical form, so defaults written out or left implicit
/// hash the same.
std::string config_hash(const ExperimentConfig &cfg);

Json to_json(const TrainedStage &stage);
TrainedStage stage_from_json(const Json &j, const std::string &origin);
void save_stage(const TrainedStage &stage, const std::string &file);
TrainedStage load_stage(const std::string &file);

/// Writes stage_<i>.json next to the pipeline file and returns the list of
/// files written, pipeline file last.
std::vector<std::string> save_pipeline(const PipelineConfig &p, const std::string &file,
                                       const std::string &config_hash);

struct LoadedPipeline {
  PipelineConfig config;
  std::string config_hash;
};

/// Throws ModelReferenceError when a stage file is missing or its hash
/// disagrees with the pipeline's, unless forced.
LoadedPipeline load_pipeline(const std::string &file, bool force = false);

/// Shortest text that reads back to the same double.
std::string format_double(double v);

class CsvWriter {
public:
  CsvWriter(const std::string &file, std::initializer_list<std::string_view> header);

  CsvWriter &operator<<(double v);
  CsvWriter &operator<<(long long v);
  CsvWriter &operator<<(int v) { return *this << static_cast<long long>(v); }
  CsvWriter &operator<<(std::size_t v) { return *this << static_cast<long long>(v); }
  CsvWriter &operator<<(std::string_view v);
  void end_row();

private:
  void sep();

  std::ofstream out_;
  std::size_t columns_;
  std::size_t column_ = 0;
};

} // namespace nnadc
