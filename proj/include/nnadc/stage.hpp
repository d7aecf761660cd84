#pragma once

// A pipeline stage as deployed: either an ideal oracle or a pair of trained
// crossbar networks (sub-ADC and residue) sharing a VTC family.

#include "nnadc/crossbar.hpp"
#include "nnadc/mlp.hpp"
#include "nnadc/signal.hpp"
#include "nnadc/vtc.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

namespace nnadc {

/// Transfer function a stage implements: the uniform quantizer or one step
/// of the log2(1 + v) quantizer.
enum class StageFunction { linear, logarithmic };

std::string to_string(StageFunction f);
StageFunction stage_function_from_string(const std::string &name);

/// Decision and residue targets of a stage. The residue is computed for an
/// arbitrary decision, so a trained residue network can be asked to follow
/// whatever its own sub-ADC decided.
int target_level(double v, const StageSpec &spec, StageFunction f);
double target_residue(double v, int level, const StageSpec &spec, StageFunction f);

struct StageMetrics {
  double subadc_enob = 0.0;
  double subadc_sndr_db = 0.0;
  double level_error_rate = 0.0;  // fraction of the 2048-point grid
  double residue_mse = 0.0;       // vdd^2, against the actual-decision target
  double ideal_residue_mse = 0.0; // vdd^2, against the ideal-decision target
};

struct TrainedStage {
  StageSpec spec;
  StageFunction function = StageFunction::linear;
  bool ideal = false;
  bool has_residue = true;
  DeviceGrid grid;
  std::optional<CrossbarNetwork> subadc;
  std::optional<CrossbarNetwork> residue;
  std::shared_ptr<const VtcFamily> family;
  StageMetrics metrics;
  std::uint64_t seed = 0;
  std::string config_hash;
};

TrainedStage make_ideal_stage(const StageSpec &spec, StageFunction f, bool has_residue = true);

/// Stage with effective weights cached, for repeated conversions.
class StageEvaluator {
public:
  explicit StageEvaluator(const TrainedStage &stage);

  const TrainedStage &stage() const noexcept { return *stage_; }

  /// Hard comparator outputs of the sub-ADC (behavioral stages only).
  Bits subadc_bits(double v) const;
  int level(double v) const;
  /// Residue for the stage's own decision, clamped to [0, vdd].
  double residue(double v, const Bits &bits) const;

  struct Output {
    int level = 0;
    double residue = 0.0;
  };
  Output convert(double v, bool want_residue) const;

private:
  const TrainedStage *stage_;
  MlpParams subadc_;
  MlpParams residue_;
  Head subadc_head_;
  Head residue_head_;
};

/// Residue network inputs: v followed by the smooth bits as rail voltages.
std::vector<double> residue_inputs(double v, const Bits &bits, double vdd);

} // namespace nnadc
