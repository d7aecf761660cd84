#pragma once

// Everything one experiment needs, derived deterministically from a single
// config and master seed.

#include "nnadc/crossbar.hpp"
#include "nnadc/dse.hpp"
#include "nnadc/metrics.hpp"
#include "nnadc/pipeline.hpp"
#include "nnadc/signal.hpp"
#include "nnadc/stage.hpp"
#include "nnadc/trainer.hpp"
#include "nnadc/vtc.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nnadc {

inline constexpr int experiment_schema_version = 1;

struct VtcFamilySpec {
  std::size_t size = 100;
  double midpoint_fraction = default_vtc_midpoint_fraction;
  double sigma_vm_fraction = 0.02;  // of vdd
  double sigma_s_rel = 0.10;
};

/// Per-resolution network sizes and residue gain.
struct StageShape {
  int subadc_hidden = 8;
  int residue_hidden = 16;
  double residue_gain = 10.0;
};

/// Overrides for one pipeline position. Train patches are applied on top of
/// the experiment's train configs.
struct StageOverride {
  std::optional<int> subadc_hidden;
  std::optional<int> residue_hidden;
  std::optional<TrainConfig> train;
  std::optional<TrainConfig> residue_train;
};

struct ExperimentConfig {
  double vdd = 1.0;
  DeviceGrid grid;
  VtcFamilySpec vtc;
  TrainConfig train;
  /// Residue-network settings; the sub-ADC settings are used when absent.
  std::optional<TrainConfig> residue_train;
  std::map<int, StageShape> shapes;  // keyed by resolution
  Composition composition{1, 1, 1, 1, 1, 1, 1, 1};
  EncodingScheme encoding;
  std::vector<StageOverride> stage_overrides;  // by pipeline position
  SineTest stimulus;
  McEvalSpec mc;
  std::optional<CostTable> cost_table;
  EnobSource enob_source = EnobSource::simulated;
  std::string output_dir = "nnadc-out";
  std::uint64_t master_seed = 1;
  unsigned threads = 1;

  void validate() const;
};

/// Fixed seed streams under the master seed.
enum class SeedStream : std::uint64_t { vtc_family = 1, training = 2, monte_carlo = 3, sweep = 4 };

std::uint64_t component_seed(std::uint64_t master, SeedStream stream);

StageShape shape_for(const ExperimentConfig &cfg, int resolution);
StageSpec stage_spec_for(const ExperimentConfig &cfg, int resolution, std::size_t position);
TrainConfig train_config_for(const ExperimentConfig &cfg, std::size_t position);
TrainConfig residue_train_config_for(const ExperimentConfig &cfg, std::size_t position);

std::shared_ptr<const VtcFamily> make_family(const ExperimentConfig &cfg);

/// Called after each stage is trained.
using StageProgress = std::function<void(std::size_t position, const TrainedStage &)>;

/// Trains one stage per composition entry, each with its own seed; the last
/// stage has no residue network.
PipelineConfig train_pipeline(const ExperimentConfig &cfg,
                              std::shared_ptr<const VtcFamily> family,
                              const StageProgress &progress = {});

/// Sub-ADC (and optionally residue) accuracy versus RRAM precision under
/// resistance perturbation.
struct PrecisionSweepSpec {
  std::vector<int> resolutions{1, 2, 3};
  std::vector<int> precisions{1, 2, 3, 4, 5, 6, 7};
  /// Sub-ADC hidden sizes; empty means the configured shape.
  std::vector<int> hidden;
  int runs = 100;
  double sigma = 0.05;
  bool with_residue = false;
  unsigned threads = 1;
};

struct PrecisionPoint {
  int resolution = 0;
  int hidden = 0;
  int precision = 0;
  std::uint64_t seed = 0;
  double nominal_enob = 0.0;
  double median_enob = 0.0;
  double nominal_residue_mse = 0.0;  // NaN without a residue network
  double median_residue_mse = 0.0;
  std::vector<double> run_enob;
};

/// One point per (resolution, hidden, precision), in that nesting order.
/// Seeds depend only on the point, so any subset reproduces the same values.
std::vector<PrecisionPoint> precision_sweep(const ExperimentConfig &cfg,
                                            std::shared_ptr<const VtcFamily> family,
                                            const PrecisionSweepSpec &sweep);

} // namespace nnadc
