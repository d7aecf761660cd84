#include "fixtures.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/trainer.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace nnadc;
using nnadc::testing::quick_config;
using nnadc::testing::small_family;

TEST_SUITE("trainer") {

TEST_CASE("learning rate decays geometrically") {
  TrainConfig c;
  c.total_iters = 101;
  CHECK(learning_rate(c, 0) == doctest::Approx(1e-3));
  CHECK(learning_rate(c, 100) == doctest::Approx(1e-4));
  CHECK(learning_rate(c, 50) == doctest::Approx(std::sqrt(1e-7)));
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lr_end = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.precision_bits = 9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("training is bit-reproducible") {
  const auto spec = default_stage_spec(1);
  const DeviceGrid grid{1e-6, 8e-6, 3};
  auto c = quick_config(11);
  c.total_iters = 200;
  const auto a = train_stage(spec, small_family(), grid, c);
  const auto b = train_stage(spec, small_family(), grid, c);
  CHECK(std::equal(a.subadc->layer1.pairs().begin(), a.subadc->layer1.pairs().end(),
                   b.subadc->layer1.pairs().begin()));
  CHECK(std::equal(a.residue->layer2.pairs().begin(), a.residue->layer2.pairs().end(),
                   b.residue->layer2.pairs().begin()));
  CHECK(a.metrics.residue_mse == b.metrics.residue_mse);
  c.seed = 12;
  const auto d = train_stage(spec, small_family(), grid, c);
  CHECK_FALSE(std::equal(a.residue->layer1.pairs().begin(), a.residue->layer1.pairs().end(),
                         d.residue->layer1.pairs().begin()));
}

TEST_CASE("trained networks sit on the device grid") {
  for (int a = 1; a <= 4; ++a) {
    auto c = quick_config(3);
    c.total_iters = 150;
    c.precision_bits = a;
    const auto s = train_stage(default_stage_spec(2), small_family(), DeviceGrid{1e-6, 8e-6, a}, c);
    for (const auto *net : {&*s.subadc, &*s.residue}) {
      CHECK(net->layer1.on_grid());
      CHECK(net->layer2.on_grid());
      CHECK(net->layer1.complementary());
      const auto p = from_crossbar(*net);
      CHECK(is_projected(p, s.grid, 1.0));
    }
  }
}

TEST_CASE("residue training sees the sub-ADC's own decisions") {
  const auto spec = default_stage_spec(2);
  const DeviceGrid grid{1e-6, 8e-6, 3};
  auto c = quick_config(21);
  c.total_iters = 150;
  // The observer runs while the residue network trains; the sub-ADC it must
  // agree with is only known afterwards, so keep the batches.
  std::vector<Batch> seen;
  StageTrainOptions opts;
  opts.residue_observer = [&](const Batch &b) {
    if (seen.size() < 20)
      seen.push_back(b);
  };
  const auto stage = train_stage(spec, small_family(), grid, c, opts);
  REQUIRE_FALSE(seen.empty());
  StageEvaluator eval(stage);
  std::size_t rows = 0, differs_from_ideal = 0;
  for (const auto &b : seen) {
    REQUIRE(b.inputs.cols() == 1 + static_cast<std::size_t>(spec.smooth_width));
    for (std::size_t r = 0; r < b.inputs.rows(); ++r) {
      const double v = b.inputs(r, 0);
      const auto hard = eval.subadc_bits(v);
      const auto ideal = smooth_encode(ideal_stage_level(v, spec), spec);
      bool differs = false;
      for (int k = 0; k < spec.smooth_width; ++k) {
        const double bit = b.inputs(r, 1 + k);
        CHECK((bit == 0.0 || bit == spec.vdd));
        CHECK((bit == spec.vdd) == (hard[k] == 1));
        differs |= hard[k] != ideal[k];
      }
      // Targets follow the decision actually made, saturating at the rails.
      const int level = smooth_decode(hard, spec);
      const double want = std::clamp(target_residue(v, level, spec, StageFunction::linear), 0.0, spec.vdd);
      CHECK(b.targets(r, 0) == doctest::Approx(want));
      differs_from_ideal += differs;
      ++rows;
    }
  }
  CHECK(rows > 0);
  MESSAGE("rows whose hard code differs from the ideal code: " << differs_from_ideal << " of " << rows);
}

TEST_CASE("N=1 sub-ADC decides the obvious points") {
  const auto &s = nnadc::testing::quick_stage(1);
  StageEvaluator eval(s);
  CHECK(eval.subadc_bits(0.25) == Bits{0, 0});
  CHECK(eval.subadc_bits(0.75) == Bits{1, 1});
}

TEST_CASE("N=2 sub-ADC with the reference network size") {
  // 1x4x3 sub-ADC, 3-bit devices. An ideal 2-bit quantizer measures 1.917,
  // so this needs nearly every grid point decided correctly.
  TrainConfig c;
  c.total_iters = 5000;
  c.surrogate_end = 0.002;
  c.restarts = 3;
  c.anneal_moves = 100000;
  c.anneal_t_start = 0.01;
  c.anneal_t_end = 1e-5;
  StageTrainOptions opts;
  opts.has_residue = false;
  const auto s = train_stage(default_stage_spec(2), small_family(), DeviceGrid{1e-6, 8e-6, 3}, c, opts);
  MESSAGE("N=2 sub-ADC ENOB " << s.metrics.subadc_enob);
  CHECK(s.metrics.subadc_enob >= 1.9);
}

TEST_CASE("residue config must share the device precision") {
  auto c = quick_config();
  StageTrainOptions opts;
  opts.residue_config = c;
  opts.residue_config->precision_bits = 5;
  CHECK_THROWS_AS(train_stage(default_stage_spec(1), small_family(), DeviceGrid{1e-6, 8e-6, 3}, c, opts),
                  ConfigError);
}

}
