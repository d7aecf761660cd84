#include "nnadc/pipeline.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/seed.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nnadc {

int PipelineConfig::resolution() const noexcept {
  int total = 0;
  for (const auto &s : stages)
    total += s.spec.resolution_bits;
  return total;
}

double PipelineConfig::vdd() const {
  if (stages.empty())
    throw ConfigError("pipeline has no stages");
  return stages.front().spec.vdd;
}

void PipelineConfig::validate() const {
  if (stages.empty())
    throw ConfigError("pipeline has no stages");
  enc.validate();
  const int reso = resolution();
  if (reso > max_pipeline_resolution)
    throw ConfigError("pipeline resolution " + std::to_string(reso) + " exceeds " +
                      std::to_string(max_pipeline_resolution));
  const auto want = enc.kind == EncodingKind::linear ? StageFunction::linear
                                                     : StageFunction::logarithmic;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto &s = stages[i];
    s.spec.validate();
    if (s.spec.vdd != stages.front().spec.vdd)
      throw ConfigError("stage " + std::to_string(i) + " has a different vdd");
    if (s.function != want)
      throw ConfigError("stage " + std::to_string(i) + " is " + to_string(s.function) +
                        " but the encoding is " + to_string(enc.kind));
    if (!s.has_residue && i + 1 != stages.size())
      throw ConfigError("stage " + std::to_string(i) +
                        " has no residue network but is not the last stage");
  }
  if (!(sample_hold.gain > 0.0))
    throw ConfigError("sample-and-hold gain must be positive");
}

StageConversion simulate_stage(const TrainedStage &stage, double v, SimMode mode,
                               bool want_residue) {
  const auto &spec = stage.spec;
  if (!(v >= 0.0 && v <= spec.vdd))
    throw DomainError("stage input outside [0, vdd]");
  if (want_residue && !stage.has_residue)
    throw UsageError("terminal stage does not produce a residue");
  if (mode == SimMode::ideal || stage.ideal) {
    const int level = target_level(v, spec, stage.function);
    StageConversion out{level, 0.0};
    if (want_residue)
      out.residue = std::clamp(target_residue(v, level, spec, stage.function), 0.0, spec.vdd);
    return out;
  }
  const StageEvaluator eval(stage);
  const auto c = eval.convert(v, want_residue);
  return {c.level, c.residue};
}

PipelineRunner::PipelineRunner(const PipelineConfig &config) : config_(&config) {
  config.validate();
  evaluators_.reserve(config.stages.size());
  for (const auto &s : config.stages)
    evaluators_.emplace_back(s);
}

std::vector<StageConversion> PipelineRunner::trace(double v, SimMode mode) const {
  const auto &cfg = *config_;
  const double vdd = cfg.vdd();
  double x = std::clamp(cfg.enc.normalized_amplitude(v), 0.0, 1.0) * vdd;
  std::vector<StageConversion> out;
  out.reserve(evaluators_.size());
  for (std::size_t i = 0; i < evaluators_.size(); ++i) {
    const bool last = i + 1 == evaluators_.size();
    const auto &stage = cfg.stages[i];
    StageConversion c;
    if (mode == SimMode::ideal || stage.ideal) {
      c.level = target_level(x, stage.spec, stage.function);
      if (!last)
        c.residue = std::clamp(target_residue(x, c.level, stage.spec, stage.function), 0.0, vdd);
    } else {
      const auto r = evaluators_[i].convert(x, !last);
      c = {r.level, r.residue};
    }
    out.push_back(c);
    if (!last)
      x = std::clamp(cfg.sample_hold.gain * c.residue + cfg.sample_hold.offset, 0.0, vdd);
  }
  return out;
}

DigitalCode PipelineRunner::convert(double v, SimMode mode) const {
  const auto t = trace(v, mode);
  std::uint32_t value = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const int n = config_->stages[i].spec.resolution_bits;
    value = (value << n) | static_cast<std::uint32_t>(t[i].level);
  }
  return DigitalCode(value, config_->resolution());
}

DigitalCode simulate_pipeline(const PipelineConfig &config, double v, SimMode mode) {
  return PipelineRunner(config).convert(v, mode);
}

double reconstruct(const DigitalCode &code, const EncodingScheme &enc) {
  enc.validate();
  const double t = (code.value() + 0.5) / std::ldexp(1.0, code.width());
  const double a = enc.kind == EncodingKind::linear ? t : std::exp2(t) - 1.0;
  return enc.v_min + a * (enc.v_max - enc.v_min);
}

std::vector<double> pipeline_output(const PipelineRunner &runner, SimMode mode,
                                    const SineTest &test_in) {
  const auto &enc = runner.config().enc;
  SineTest test = test_in;
  test.vdd = 1.0;
  const double full = std::ldexp(1.0, runner.config().resolution());
  if (enc.kind == EncodingKind::linear) {
    return converter_output(
        [&](double s) {
          const double v = enc.v_min + s * (enc.v_max - enc.v_min);
          return (runner.convert(v, mode).value() + 0.5) / full;
        },
        test);
  }
  // Tone in t = log2(1 + a); the converter's codes are uniform in t.
  return converter_output(
      [&](double s) {
        const double a = std::clamp(std::exp2(s) - 1.0, 0.0, 1.0);
        const double v = enc.v_min + a * (enc.v_max - enc.v_min);
        return (runner.convert(v, mode).value() + 0.5) / full;
      },
      test);
}

SndrResult pipeline_enob(const PipelineRunner &runner, SimMode mode, const SineTest &test) {
  return sndr_enob(pipeline_output(runner, mode, test), test.f_s, test.f_in());
}

void McEvalSpec::validate() const {
  if (runs < 1)
    throw ConfigError("Monte Carlo runs must be >= 1");
  if (sigma < 0.0)
    throw ConfigError("perturbation sigma must be >= 0");
}

TrainedStage perturb_stage(const TrainedStage &stage, double sigma, std::uint64_t seed) {
  TrainedStage out = stage;
  if (out.subadc) {
    out.subadc->layer1 = perturb_resistances(out.subadc->layer1, {sigma, split_seed(seed, 0)});
    out.subadc->layer2 = perturb_resistances(out.subadc->layer2, {sigma, split_seed(seed, 1)});
  }
  if (out.residue) {
    out.residue->layer1 = perturb_resistances(out.residue->layer1, {sigma, split_seed(seed, 2)});
    out.residue->layer2 = perturb_resistances(out.residue->layer2, {sigma, split_seed(seed, 3)});
  }
  return out;
}

PipelineConfig perturb_pipeline(const PipelineConfig &config, double sigma, std::uint64_t seed) {
  PipelineConfig out = config;
  for (std::size_t i = 0; i < out.stages.size(); ++i)
    out.stages[i] = perturb_stage(config.stages[i], sigma, split_seed(seed, i));
  return out;
}

double median(std::vector<double> values) {
  if (values.empty())
    throw ConfigError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

McSummary monte_carlo_eval(const PipelineConfig &config, const McEvalSpec &mc,
                           const SineTest &test) {
  mc.validate();
  McSummary s;
  s.nominal_enob = pipeline_enob(PipelineRunner(config), SimMode::behavioral, test).enob;
  s.run_enob.reserve(static_cast<std::size_t>(mc.runs));
  for (int run = 0; run < mc.runs; ++run) {
    const auto perturbed =
        perturb_pipeline(config, mc.sigma, split_seed(mc.seed, static_cast<std::uint64_t>(run)));
    s.run_enob.push_back(pipeline_enob(PipelineRunner(perturbed), SimMode::behavioral, test).enob);
  }
  s.median_enob = median(s.run_enob);
  return s;
}

} // namespace nnadc
