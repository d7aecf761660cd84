#pragma once

// Pipelined converter built from ideal or trained stages: per-stage
// conversion, MSB-first digital combiner, reconstruction, and Monte Carlo
// robustness under resistance perturbation.

#include "nnadc/metrics.hpp"
#include "nnadc/signal.hpp"
#include "nnadc/stage.hpp"

#include <cstdint>
#include <vector>

namespace nnadc {

enum class SimMode { ideal, behavioral };

/// Inter-stage sample-and-hold: r' = gain * r + offset, then clamped to the
/// rails. Identity by default.
struct SampleHold {
  double gain = 1.0;
  double offset = 0.0;
};

inline constexpr int max_pipeline_resolution = 24;

struct PipelineConfig {
  std::vector<TrainedStage> stages;
  EncodingScheme enc;
  SampleHold sample_hold;

  int resolution() const noexcept;
  double vdd() const;
  /// Checks stage/encoding consistency, the resolution bound, and that only
  /// the last stage may lack a residue network.
  void validate() const;
};

struct StageConversion {
  int level = 0;
  double residue = 0.0;
};

/// Ideal mode uses the oracles; behavioral mode runs the stage's networks.
/// Throws UsageError when a residue is requested from a residue-less stage.
StageConversion simulate_stage(const TrainedStage &stage, double v, SimMode mode,
                               bool want_residue = true);

/// Pipeline with per-stage evaluators built once.
class PipelineRunner {
public:
  explicit PipelineRunner(const PipelineConfig &config);
  PipelineRunner(PipelineConfig &&) = delete;  // keeps a pointer to the config

  const PipelineConfig &config() const noexcept { return *config_; }
  DigitalCode convert(double v, SimMode mode) const;
  /// Per-stage levels and the residue each stage handed on.
  std::vector<StageConversion> trace(double v, SimMode mode) const;

private:
  const PipelineConfig *config_;
  std::vector<StageEvaluator> evaluators_;
};

DigitalCode simulate_pipeline(const PipelineConfig &config, double v, SimMode mode);

/// Midpoint reconstruction; the logarithmic kind inverts t = log2(a + 1).
double reconstruct(const DigitalCode &code, const EncodingScheme &enc);

/// Reconstructed outputs (normalized to [0, 1]) for the coherent sine.
std::vector<double> pipeline_output(const PipelineRunner &runner, SimMode mode,
                                    const SineTest &test = {});

/// ENOB of the pipeline on a coherent sine. For logarithmic encodings the
/// tone is applied in the log domain and measured there.
SndrResult pipeline_enob(const PipelineRunner &runner, SimMode mode, const SineTest &test = {});

struct McEvalSpec {
  int runs = 100;
  double sigma = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct McSummary {
  double median_enob = 0.0;
  double nominal_enob = 0.0;
  std::vector<double> run_enob;
};

/// Copy of the stage with every crossbar perturbed; seeds derive from
/// `seed` per layer.
TrainedStage perturb_stage(const TrainedStage &stage, double sigma, std::uint64_t seed);

PipelineConfig perturb_pipeline(const PipelineConfig &config, double sigma, std::uint64_t seed);

McSummary monte_carlo_eval(const PipelineConfig &config, const McEvalSpec &mc,
                           const SineTest &test = {});

double median(std::vector<double> values);

} // namespace nnadc
