#include "nnadc/stage.hpp"

#include "nnadc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace nnadc {

std::string to_string(StageFunction f) {
  return f == StageFunction::linear ? "linear" : "logarithmic";
}

StageFunction stage_function_from_string(const std::string &name) {
  if (name == "linear")
    return StageFunction::linear;
  if (name == "logarithmic" || name == "log")
    return StageFunction::logarithmic;
  throw ConfigError("unknown stage function '" + name + "'");
}

int target_level(double v, const StageSpec &spec, StageFunction f) {
  if (f == StageFunction::linear)
    return ideal_stage_level(v, spec);
  if (!(v >= 0.0 && v <= spec.vdd))
    throw DomainError("stage input outside [0, vdd]");
  return log_stage_oracle(v / spec.vdd, spec.resolution_bits).bit;
}

double target_residue(double v, int level, const StageSpec &spec, StageFunction f) {
  if (f == StageFunction::linear)
    return residue_for_level(v, level, spec.resolution_bits, spec.vdd);
  double power = 1.0 + v / spec.vdd;
  for (int i = 0; i < spec.resolution_bits; ++i)
    power *= power;
  return spec.vdd * (power / std::ldexp(1.0, level) - 1.0);
}

TrainedStage make_ideal_stage(const StageSpec &spec, StageFunction f, bool has_residue) {
  spec.validate();
  TrainedStage s;
  s.spec = spec;
  s.function = f;
  s.ideal = true;
  s.has_residue = has_residue;
  return s;
}

std::vector<double> residue_inputs(double v, const Bits &bits, double vdd) {
  std::vector<double> in;
  in.reserve(bits.size() + 1);
  in.push_back(v);
  for (auto b : bits)
    in.push_back(b ? vdd : 0.0);
  return in;
}

StageEvaluator::StageEvaluator(const TrainedStage &stage) : stage_(&stage) {
  if (stage.ideal)
    return;
  if (!stage.subadc || !stage.family)
    throw ConfigError("behavioral stage lacks a sub-ADC network or VTC family");
  if (stage.has_residue && !stage.residue)
    throw ConfigError("behavioral stage lacks a residue network");
  subadc_ = from_crossbar(*stage.subadc);
  subadc_head_ = {HeadKind::subadc, stage.spec.vdd, 1.0, 0.01 * stage.spec.vdd};
  if (stage.has_residue) {
    residue_ = from_crossbar(*stage.residue);
    residue_head_ = {HeadKind::residue, stage.spec.vdd, stage.spec.residue_gain, 0.0};
  }
}

Bits StageEvaluator::subadc_bits(double v) const {
  const auto &spec = stage_->spec;
  if (stage_->ideal)
    return smooth_encode(target_level(v, spec, stage_->function), spec);
  const double in[1] = {v};
  const auto out = forward_stage(subadc_, in, *stage_->family, subadc_head_, Mode::infer);
  Bits bits(out.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    bits[i] = out[i] >= 0.5 * spec.vdd ? 1 : 0;
  return bits;
}

int StageEvaluator::level(double v) const {
  if (stage_->ideal)
    return target_level(v, stage_->spec, stage_->function);
  return smooth_decode(subadc_bits(v), stage_->spec);
}

double StageEvaluator::residue(double v, const Bits &bits) const {
  const auto &spec = stage_->spec;
  if (!stage_->has_residue)
    throw UsageError("terminal stage does not produce a residue");
  if (stage_->ideal) {
    const int level = smooth_decode(bits, spec);
    return std::clamp(target_residue(v, level, spec, stage_->function), 0.0, spec.vdd);
  }
  const auto in = residue_inputs(v, bits, spec.vdd);
  const auto out = forward_stage(residue_, in, *stage_->family, residue_head_, Mode::infer);
  const double r = out[0];
  if (!std::isfinite(r))
    return 0.0;
  return std::clamp(r, 0.0, spec.vdd);
}

StageEvaluator::Output StageEvaluator::convert(double v, bool want_residue) const {
  const auto &spec = stage_->spec;
  v = std::clamp(v, 0.0, spec.vdd);
  if (stage_->ideal) {
    const int level = target_level(v, spec, stage_->function);
    Output out{level, 0.0};
    if (want_residue) {
      if (!stage_->has_residue)
        throw UsageError("terminal stage does not produce a residue");
      out.residue = std::clamp(target_residue(v, level, spec, stage_->function), 0.0, spec.vdd);
    }
    return out;
  }
  const auto bits = subadc_bits(v);
  Output out{smooth_decode(bits, spec), 0.0};
  if (want_residue)
    out.residue = residue(v, bits);
  return out;
}

} // namespace nnadc
