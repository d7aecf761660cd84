#pragma once

// Hardware-aware training of a stage's two networks: Adam on full-precision
// shadow parameters, periodic clip+quantize onto the device grid, random
// per-neuron VTC assignment, and a final search over grid levels.

#include "nnadc/crossbar.hpp"
#include "nnadc/mlp.hpp"
#include "nnadc/signal.hpp"
#include "nnadc/stage.hpp"
#include "nnadc/vtc.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace nnadc {

enum class VtcPolicy {
  per_batch,  // fresh random assignment every mini-batch
  fixed,      // one assignment drawn up front and kept
};

std::string to_string(VtcPolicy p);
VtcPolicy vtc_policy_from_string(const std::string &name);

struct TrainConfig {
  std::size_t batch_size = 4096;
  long total_iters = 20000;
  long projection_period = 256;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  AdamConfig adam;
  int precision_bits = 3;
  std::uint64_t seed = 1;
  VtcPolicy vtc_policy = VtcPolicy::fixed;
  /// Sub-ADC comparator surrogate width, as a fraction of vdd, annealed
  /// geometrically from start to end.
  double surrogate_start = 0.25;
  double surrogate_end = 0.01;
  /// Independent initializations; the best validated one is kept.
  int restarts = 1;
  /// Coordinate-descent sweeps over grid levels after training (0 = off).
  int polish_sweeps = 8;
  /// Sweeps of whole-unit replacement: each hidden unit in turn is swapped
  /// for the best input-level pattern and output levels (0 = off).
  int unit_sweeps = 0;
  std::size_t unit_max_shapes = 4096;
  /// Simulated-annealing moves over grid levels before the polish (0 = off).
  long anneal_moves = 200000;
  /// Annealing temperatures relative to the loss the search starts from.
  double anneal_t_start = 0.05;
  double anneal_t_end = 1e-4;
  int anneal_restarts = 1;
  /// Assignments averaged by validation and polish under the per-batch
  /// policy.
  std::size_t validation_draws = 8;

  void validate() const;
};

/// Geometric interpolation lr_start -> lr_end over total_iters.
double learning_rate(const TrainConfig &config, long iter);

/// Supervised problem for one network.
struct NetworkTask {
  std::size_t inputs = 1;
  std::size_t hidden = 1;
  std::size_t outputs = 1;
  Head head;
  /// Writes the network inputs and targets for input voltage v.
  std::function<void(double v, std::span<double> inputs, std::span<double> targets)> sample;
};

struct NetworkResult {
  MlpParams params;              // projected, assignment set
  double validation_loss = 0.0;  // on the 2048-point grid, before polish
  double final_loss = 0.0;       // after polish
  long best_iteration = 0;
  std::vector<double> projected_loss_history;
};

/// Observer of the training data; used to check what a network was fed.
using BatchObserver = std::function<void(const Batch &)>;

NetworkResult train_network(const NetworkTask &task, const VtcFamily &family,
                            const DeviceGrid &grid, double vdd, const TrainConfig &config,
                            std::uint64_t seed, const BatchObserver &observer = {});

/// Grid-level coordinate descent on `params` (must be projected) against
/// the validation loss averaged over `assignments`. Returns the final loss.
double polish(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
              const DeviceGrid &grid, double vdd,
              const std::vector<std::vector<std::size_t>> &assignments, int max_sweeps);

/// Whole-unit block coordinate descent over grid levels, interleaved with
/// single-parameter polish sweeps. Returns the final loss.
double unit_search(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
                   const DeviceGrid &grid, double vdd,
                   const std::vector<std::vector<std::size_t>> &assignments, int sweeps,
                   std::size_t max_shapes, std::uint64_t seed);

/// Metropolis search over single-parameter level changes with a geometric
/// temperature schedule; leaves `params` at the best state visited.
double anneal(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
              const DeviceGrid &grid, double vdd,
              const std::vector<std::vector<std::size_t>> &assignments, long moves,
              std::uint64_t seed, double t_start_rel = 0.05, double t_end_rel = 1e-4);

struct StageTrainOptions {
  StageFunction function = StageFunction::linear;
  bool has_residue = true;
  /// Sees every residue-network training batch.
  BatchObserver residue_observer;
  /// Overrides the stage config for the residue network only.
  std::optional<TrainConfig> residue_config;
};

NetworkTask subadc_task(const StageSpec &spec, StageFunction f, double surrogate_width);

/// Residue inputs use the trained sub-ADC's hard outputs; the target is the
/// residue for the level those outputs decode to.
NetworkTask residue_task(const StageSpec &spec, StageFunction f, const MlpParams &subadc,
                         const VtcFamily &family);

TrainedStage train_stage(const StageSpec &spec, std::shared_ptr<const VtcFamily> family,
                         const DeviceGrid &grid, const TrainConfig &config,
                         const StageTrainOptions &options = {});

/// Metrics of a stage against its own targets.
StageMetrics evaluate_stage(const TrainedStage &stage);

/// Sub-ADC ENOB from a coherent sine through the stage's comparators,
/// reconstructing each level at its midpoint (in the log domain for
/// logarithmic stages).
double subadc_enob(const StageEvaluator &eval, double *sndr_db = nullptr);

} // namespace nnadc
