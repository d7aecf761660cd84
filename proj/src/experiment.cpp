#include "nnadc/experiment.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/seed.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>
#include <string>

namespace nnadc {

void ExperimentConfig::validate() const {
  if (!(vdd > 0.0))
    throw ConfigError("config.vdd: must be positive");
  grid.validate();
  if (vtc.size < 1)
    throw ConfigError("config.vtc.size: must be >= 1");
  if (!(vtc.midpoint_fraction > 0.0 && vtc.midpoint_fraction < 1.0))
    throw ConfigError("config.vtc.midpoint_fraction: must be in (0, 1)");
  if (vtc.sigma_vm_fraction < 0.0 || vtc.sigma_s_rel < 0.0)
    throw ConfigError("config.vtc: sigmas must be >= 0");
  train.validate();
  if (residue_train)
    residue_train->validate();
  for (const auto &[n, s] : shapes) {
    if (n < 1 || n > 3)
      throw ConfigError("config.shapes: resolution must be 1, 2 or 3");
    if (s.subadc_hidden < 1 || s.residue_hidden < 1 || !(s.residue_gain > 0.0))
      throw ConfigError("config.shapes." + std::to_string(n) + ": sizes and gain must be positive");
  }
  if (composition.empty())
    throw ConfigError("config.pipeline.composition: empty");
  int reso = 0;
  for (int n : composition) {
    if (n < 1 || n > 3)
      throw ConfigError("config.pipeline.composition: parts must be 1, 2 or 3");
    reso += n;
  }
  if (reso > max_pipeline_resolution)
    throw ConfigError("config.pipeline.composition: resolution exceeds " +
                      std::to_string(max_pipeline_resolution));
  if (stage_overrides.size() > composition.size())
    throw ConfigError("config.pipeline.stages: more overrides than stages");
  encoding.validate();
  if (!is_power_of_two(stimulus.n) || stimulus.cycles == 0 || stimulus.cycles >= stimulus.n / 2)
    throw ConfigError("config.stimulus: n must be a power of two and 0 < cycles < n/2");
  mc.validate();
  if (cost_table)
    cost_table->validate();
  if (output_dir.empty())
    throw ConfigError("config.output_dir: empty");
  if (threads < 1)
    throw ConfigError("config.threads: must be >= 1");
}

std::uint64_t component_seed(std::uint64_t master, SeedStream stream) {
  return split_seed(master, static_cast<std::uint64_t>(stream));
}

StageShape shape_for(const ExperimentConfig &cfg, int resolution) {
  if (auto it = cfg.shapes.find(resolution); it != cfg.shapes.end())
    return it->second;
  StageShape s;
  const auto d = default_stage_spec(resolution, cfg.vdd);
  s.subadc_hidden = std::max(8, d.subadc_hidden);
  s.residue_hidden = std::max(16, d.residue_hidden);
  return s;
}

StageSpec stage_spec_for(const ExperimentConfig &cfg, int resolution, std::size_t position) {
  auto spec = default_stage_spec(resolution, cfg.vdd);
  const auto shape = shape_for(cfg, resolution);
  spec.subadc_hidden = shape.subadc_hidden;
  spec.residue_hidden = shape.residue_hidden;
  spec.residue_gain = shape.residue_gain;
  if (position < cfg.stage_overrides.size()) {
    const auto &o = cfg.stage_overrides[position];
    if (o.subadc_hidden)
      spec.subadc_hidden = *o.subadc_hidden;
    if (o.residue_hidden)
      spec.residue_hidden = *o.residue_hidden;
  }
  return spec;
}

namespace {

TrainConfig seeded(TrainConfig c, const ExperimentConfig &cfg, std::size_t position) {
  c.precision_bits = cfg.grid.precision_bits;
  c.seed = split_seed(component_seed(cfg.master_seed, SeedStream::training), position);
  return c;
}

} // namespace

TrainConfig train_config_for(const ExperimentConfig &cfg, std::size_t position) {
  if (position < cfg.stage_overrides.size() && cfg.stage_overrides[position].train)
    return seeded(*cfg.stage_overrides[position].train, cfg, position);
  return seeded(cfg.train, cfg, position);
}

TrainConfig residue_train_config_for(const ExperimentConfig &cfg, std::size_t position) {
  if (position < cfg.stage_overrides.size()) {
    const auto &o = cfg.stage_overrides[position];
    if (o.residue_train)
      return seeded(*o.residue_train, cfg, position);
    if (o.train && !cfg.residue_train)
      return seeded(*o.train, cfg, position);
  }
  return seeded(cfg.residue_train ? *cfg.residue_train : cfg.train, cfg, position);
}

std::shared_ptr<const VtcFamily> make_family(const ExperimentConfig &cfg) {
  auto variation = default_vtc_variation(cfg.vdd, cfg.vtc.midpoint_fraction);
  variation.sigma_vm = cfg.vtc.sigma_vm_fraction * cfg.vdd;
  variation.sigma_s_rel = cfg.vtc.sigma_s_rel;
  return std::make_shared<const VtcFamily>(
      sample_family(cfg.vtc.size, variation, component_seed(cfg.master_seed, SeedStream::vtc_family)));
}

PipelineConfig train_pipeline(const ExperimentConfig &cfg, std::shared_ptr<const VtcFamily> family,
                              const StageProgress &progress) {
  cfg.validate();
  PipelineConfig p;
  p.enc = cfg.encoding;
  const auto function = cfg.encoding.kind == EncodingKind::linear ? StageFunction::linear
                                                                  : StageFunction::logarithmic;
  for (std::size_t i = 0; i < cfg.composition.size(); ++i) {
    StageTrainOptions opts;
    opts.function = function;
    opts.has_residue = i + 1 < cfg.composition.size();
    opts.residue_config = residue_train_config_for(cfg, i);
    auto stage = train_stage(stage_spec_for(cfg, cfg.composition[i], i), family, cfg.grid,
                             train_config_for(cfg, i), opts);
    if (progress)
      progress(i, stage);
    p.stages.push_back(std::move(stage));
  }
  return p;
}

std::vector<PrecisionPoint> precision_sweep(const ExperimentConfig &cfg,
                                            std::shared_ptr<const VtcFamily> family,
                                            const PrecisionSweepSpec &sweep) {
  cfg.validate();
  if (sweep.runs < 1 || sweep.sigma < 0.0)
    throw ConfigError("sweep: runs must be >= 1 and sigma >= 0");
  std::vector<PrecisionPoint> points;
  for (int n : sweep.resolutions) {
    if (n < 1 || n > 3)
      throw ConfigError("sweep: stage resolution must be 1, 2 or 3");
    std::vector<int> hidden = sweep.hidden;
    if (hidden.empty())
      hidden.push_back(shape_for(cfg, n).subadc_hidden);
    for (int h : hidden)
      for (int a : sweep.precisions) {
        if (a < 1 || a > 7 || h < 1)
          throw ConfigError("sweep: precision must be 1..7 and hidden >= 1");
        PrecisionPoint p;
        p.resolution = n;
        p.hidden = h;
        p.precision = a;
        const std::uint64_t key = static_cast<std::uint64_t>(n) << 32 |
                                  static_cast<std::uint64_t>(h) << 8 | static_cast<std::uint64_t>(a);
        p.seed = split_seed(component_seed(cfg.master_seed, SeedStream::sweep), key);
        points.push_back(p);
      }
  }

  auto run_point = [&](PrecisionPoint &p) {
    auto spec = stage_spec_for(cfg, p.resolution, 0);
    spec.subadc_hidden = p.hidden;
    DeviceGrid grid = cfg.grid;
    grid.precision_bits = p.precision;
    TrainConfig tc = cfg.train;
    tc.precision_bits = p.precision;
    tc.seed = p.seed;
    StageTrainOptions opts;
    opts.has_residue = sweep.with_residue;
    if (sweep.with_residue) {
      opts.residue_config = cfg.residue_train ? *cfg.residue_train : cfg.train;
      opts.residue_config->precision_bits = p.precision;
    }
    const auto stage = train_stage(spec, family, grid, tc, opts);
    p.nominal_enob = stage.metrics.subadc_enob;
    p.nominal_residue_mse = sweep.with_residue ? stage.metrics.residue_mse : NAN;
    // Every precision of one (resolution, hidden) row sees the same device
    // draws, so differences along the row come from the networks.
    const std::uint64_t row =
        static_cast<std::uint64_t>(p.resolution) << 32 | static_cast<std::uint64_t>(p.hidden) << 8;
    const std::uint64_t draws = split_seed(component_seed(cfg.master_seed, SeedStream::monte_carlo), row);
    std::vector<double> mse;
    for (int r = 0; r < sweep.runs; ++r) {
      const auto perturbed = perturb_stage(stage, sweep.sigma, split_seed(draws, r));
      const auto m = evaluate_stage(perturbed);
      p.run_enob.push_back(m.subadc_enob);
      if (sweep.with_residue)
        mse.push_back(m.residue_mse);
    }
    p.median_enob = median(p.run_enob);
    p.median_residue_mse = sweep.with_residue ? median(mse) : NAN;
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(sweep.threads, static_cast<unsigned>(points.size())));
  if (threads == 1) {
    for (auto &p : points)
      run_point(p);
    return points;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < points.size(); i += threads)
          run_point(points[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto &th : pool)
    th.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
  return points;
}

} // namespace nnadc
