#include "fixtures.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/pipeline.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace nnadc;

namespace {

PipelineConfig ideal_pipeline(const std::vector<int> &comp, EncodingScheme enc = {}) {
  PipelineConfig p;
  p.enc = enc;
  const auto f = enc.kind == EncodingKind::linear ? StageFunction::linear : StageFunction::logarithmic;
  for (std::size_t i = 0; i < comp.size(); ++i)
    p.stages.push_back(make_ideal_stage(default_stage_spec(comp[i]), f, i + 1 < comp.size()));
  return p;
}

bool near_boundary(double t, int m) {
  const double x = t * std::ldexp(1.0, m);
  return std::abs(x - std::round(x)) < 1e-9 * std::ldexp(1.0, m);
}

PipelineConfig quick_pipeline() {
  PipelineConfig p;
  for (int i = 0; i < 3; ++i)
    p.stages.push_back(nnadc::testing::quick_stage(1));
  p.stages.push_back(nnadc::testing::quick_stage(1, false));
  return p;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("simulate_stage in ideal mode") {
  const auto s = make_ideal_stage(default_stage_spec(1), StageFunction::linear);
  const auto a = simulate_stage(s, 0.7, SimMode::ideal);
  CHECK(a.level == 1);
  CHECK(a.residue == doctest::Approx(0.4).epsilon(1e-12));
  for (int n = 1; n <= 3; ++n) {
    const auto z = simulate_stage(make_ideal_stage(default_stage_spec(n), StageFunction::linear), 0.0,
                                  SimMode::ideal);
    CHECK(z.level == 0);
    CHECK(z.residue == 0.0);
  }
  const auto last = make_ideal_stage(default_stage_spec(1), StageFunction::linear, false);
  CHECK_THROWS_AS(simulate_stage(last, 0.3, SimMode::ideal), UsageError);
  CHECK(simulate_stage(last, 0.3, SimMode::ideal, false).level == 0);
  CHECK_THROWS_AS(simulate_stage(s, 1.2, SimMode::ideal), DomainError);
}

TEST_CASE("four 1-bit stages convert 0.7 to 1011") {
  const auto p = ideal_pipeline({1, 1, 1, 1});
  const auto code = simulate_pipeline(p, 0.7, SimMode::ideal);
  CHECK(code.to_string() == "1011");
  const PipelineRunner run(p);
  const auto tr = run.trace(0.7, SimMode::ideal);
  REQUIRE(tr.size() == 4);
  CHECK(tr[0].residue == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(tr[1].residue == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(tr[2].residue == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(simulate_pipeline(p, 0.0, SimMode::ideal).value() == 0);
}

TEST_CASE("ideal pipelines equal ideal_adc") {
  const std::vector<std::vector<int>> comps = {
      {1, 1, 1, 1, 1, 1, 1, 1}, {2, 2, 2, 2}, {3, 3, 2}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 3}};
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto &comp : comps) {
    const auto p = ideal_pipeline(comp);
    const PipelineRunner run(p);
    const int m = p.resolution();
    int mismatches = 0;
    for (int k = 0; k < 100000; ++k) {
      const double v = u(rng);
      if (near_boundary(v, m))
        continue;
      const auto c = run.convert(v, SimMode::ideal);
      mismatches += c.value() != ideal_adc(v, m, {}).value();
      CHECK(c.value() < (1u << m));
    }
    CHECK(mismatches == 0);
  }
  const EncodingScheme log{EncodingKind::logarithmic, 0.0, 1.0};
  const auto lp = ideal_pipeline(std::vector<int>(10, 1), log);
  const PipelineRunner lrun(lp);
  int mismatches = 0;
  for (int k = 0; k < 100000; ++k) {
    const double v = u(rng);
    if (near_boundary(std::log2(1 + v), 10))
      continue;
    mismatches += lrun.convert(v, SimMode::ideal).value() != ideal_adc(v, 10, log).value();
  }
  CHECK(mismatches == 0);
}

TEST_CASE("permuting equal-resolution stages changes nothing") {
  const auto pa = ideal_pipeline({2, 1, 2, 1, 2});
  const auto pb = ideal_pipeline({1, 2, 2, 2, 1});
  const auto pc = ideal_pipeline({2, 2, 2, 1, 1});
  const PipelineRunner a(pa), b(pb), c(pc);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 10000; ++k) {
    const double v = u(rng);
    if (near_boundary(v, 8))
      continue;
    const auto x = a.convert(v, SimMode::ideal).value();
    CHECK(x == b.convert(v, SimMode::ideal).value());
    CHECK(x == c.convert(v, SimMode::ideal).value());
  }
}

TEST_CASE("reconstruct") {
  CHECK(reconstruct(DigitalCode(11, 4), {}) == doctest::Approx(0.71875));
  CHECK(reconstruct(DigitalCode(0, 4), {}) == doctest::Approx(0.03125));
  const EncodingScheme log{EncodingKind::logarithmic, 0.0, 1.0};
  // Midpoint t = (value + 0.5) / 2^M is never exactly 0.5, so bracket it.
  CHECK(reconstruct(DigitalCode(7, 4), log) == doctest::Approx(std::exp2(7.5 / 16) - 1));
  CHECK(reconstruct(DigitalCode(7, 4), log) < 0.41421);
  CHECK(reconstruct(DigitalCode(8, 4), log) > 0.41421);
  const EncodingScheme wide{EncodingKind::linear, -1.0, 1.0};
  CHECK(reconstruct(DigitalCode(1, 1), wide) == doctest::Approx(0.5));
}

TEST_CASE("validation") {
  auto p = ideal_pipeline({1, 1, 1});
  p.stages[1].has_residue = false;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  auto q = ideal_pipeline({3, 3, 3, 3, 3, 3, 3, 3, 3});
  CHECK_THROWS_AS(q.validate(), ConfigError);
  auto r = ideal_pipeline({1, 1});
  r.enc.kind = EncodingKind::logarithmic;
  CHECK_THROWS_AS(r.validate(), ConfigError);
}

TEST_CASE("ideal pipeline ENOB") {
  const auto p = ideal_pipeline({2, 2, 2, 2});
  const PipelineRunner run(p);
  CHECK(pipeline_enob(run, SimMode::ideal).enob == doctest::Approx(ideal_quantizer_enob(8)));
}

TEST_CASE("behavioral residues stay on the rails") {
  const auto &s = nnadc::testing::quick_stage(1);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const auto o = simulate_stage(s, u(rng), SimMode::behavioral);
    CHECK(o.level >= 0);
    CHECK(o.level <= 1);
    CHECK(std::isfinite(o.residue));
    CHECK(o.residue >= 0.0);
    CHECK(o.residue <= 1.0);
  }
}

TEST_CASE("Monte Carlo") {
  const auto p = quick_pipeline();
  const PipelineRunner run(p);
  const double nominal = pipeline_enob(run, SimMode::behavioral).enob;

  const auto zero = monte_carlo_eval(p, {5, 0.0, 1});
  CHECK(zero.nominal_enob == nominal);
  CHECK(zero.median_enob == nominal);
  for (double e : zero.run_enob)
    CHECK(e == nominal);

  const auto a = monte_carlo_eval(p, {6, 0.05, 9});
  const auto b = monte_carlo_eval(p, {6, 0.05, 9});
  CHECK(a.run_enob == b.run_enob);
  CHECK(a.median_enob == b.median_enob);
  CHECK(a.run_enob.size() == 6);
  // Evaluation leaves the pipeline untouched.
  CHECK(pipeline_enob(run, SimMode::behavioral).enob == nominal);
  CHECK(p.stages[0].subadc->layer1.pairs()[0] == nnadc::testing::quick_stage(1).subadc->layer1.pairs()[0]);
  CHECK_THROWS_AS(monte_carlo_eval(p, {0, 0.05, 1}), ConfigError);
}

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}

}
