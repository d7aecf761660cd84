#include "nnadc/dse.hpp"
#include "nnadc/errors.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace nnadc;

namespace {

std::uint64_t tribonacci(int n) {
  std::vector<std::uint64_t> c{1, 1, 2};
  while (static_cast<int>(c.size()) <= n)
    c.push_back(c[c.size() - 1] + c[c.size() - 2] + c[c.size() - 3]);
  return c[n];
}

CostTable random_table(std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> e(0.5e-3, 20e-3), f(0.2e9, 2e9), a(0.005, 0.1);
  const double pw[3]{e(rng), e(rng), e(rng)};
  const double fr[3]{f(rng), f(rng), f(rng)};
  const double ar[3]{a(rng), a(rng), a(rng)};
  return CostTable::simple(pw, fr, ar);
}

} // namespace

TEST_SUITE("dse") {

TEST_CASE("enumeration") {
  const auto c3 = enumerate_compositions(3);
  CHECK(c3 == std::vector<Composition>{{1, 1, 1}, {1, 2}, {2, 1}, {3}});
  const auto c4 = enumerate_compositions(4);
  CHECK(c4.size() == 7);
  CHECK(std::find(c4.begin(), c4.end(), Composition{1, 3}) != c4.end());
  CHECK(std::find(c4.begin(), c4.end(), Composition{3, 1}) != c4.end());
  CHECK(enumerate_compositions(1) == std::vector<Composition>{{1}});
  for (int r = 1; r <= 16; ++r) {
    CHECK(composition_count(r) == tribonacci(r));
    const auto all = enumerate_compositions(r);
    CHECK(all.size() == tribonacci(r));
    CHECK(std::is_sorted(all.begin(), all.end()));
    for (const auto &c : all) {
      int s = 0;
      for (int n : c) {
        CHECK(n >= 1);
        CHECK(n <= 3);
        s += n;
      }
      CHECK(s == r);
    }
  }
  CHECK(composition_count(16) == 10609);
  CHECK_THROWS_AS(enumerate_compositions(0), ConfigError);
  CHECK_THROWS_AS(enumerate_compositions(17), ConfigError);
}

TEST_CASE("Walden FoM reference values") {
  CHECK(walden_fom(25e-3, 8.0, 1e9) == doctest::Approx(97.7e-15).epsilon(0.005));
  CHECK(walden_fom(67.5e-3, 12.5, 1e9) == doctest::Approx(11.6e-15).epsilon(0.005));
  CHECK(walden_fom(31.3e-3, 9.1, 1e9) == doctest::Approx(57e-15).epsilon(0.005));
}

TEST_CASE("evaluate_candidate sums power and area, takes the slowest rate") {
  const double pw[3]{1e-3, 3e-3, 10e-3}, fr[3]{1e9, 0.8e9, 0.5e9}, ar[3]{0.01, 0.02, 0.05};
  const auto t = CostTable::simple(pw, fr, ar);
  const auto r = evaluate_candidate({1, 1, 2}, t, EnobSource::assumed);
  CHECK(r.power_w == doctest::Approx(5e-3));
  CHECK(r.rate_sps == doctest::Approx(0.8e9));
  CHECK(r.area_mm2 == doctest::Approx(0.04));
  CHECK(r.enob == 4.0);
  CHECK(r.fom_j == doctest::Approx(5e-3 / (16 * 0.8e9)));
  const auto o = evaluate_candidate({1, 2}, t, EnobSource::simulated,
                                    [](const Composition &) { return 2.5; });
  CHECK(o.enob == 2.5);
  CHECK_THROWS(evaluate_candidate({1, 2}, t, EnobSource::simulated));

  CostTable partial;
  partial.entries[1] = {{1e-3, 1e9, 0.01}};
  CHECK_THROWS_AS(evaluate_candidate({1, 2}, partial, EnobSource::assumed), ConfigError);
}

TEST_CASE("synthetic table winner") {
  const double pw[3]{1e-3, 3e-3, 10e-3}, fr[3]{1e9, 0.8e9, 0.5e9}, ar[3]{0.01, 0.02, 0.05};
  const auto ranked = optimize(4, CostTable::simple(pw, fr, ar), EnobSource::assumed);
  REQUIRE(ranked.size() == 7);
  CHECK(ranked[0].composition == Composition{1, 1, 1, 1});
  CHECK(ranked[0].fom_j == doctest::Approx(250e-15));
  CHECK(ranked[1].fom_j == doctest::Approx(5e-3 / (16 * 0.8e9)));
  CHECK(optimize(1, CostTable::simple(pw, fr, ar), EnobSource::assumed).size() == 1);
}

TEST_CASE("optimize agrees with a brute-force rescan") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_table(rng);
    for (int reso : {4, 8, 14}) {
      const auto ranked = optimize(reso, t, EnobSource::assumed, {}, 1 + trial % 3);
      CHECK(ranked.size() == tribonacci(reso));
      const auto &win = ranked.front();
      // Independent evaluation straight from the table.
      for (const auto &c : enumerate_compositions(reso)) {
        double p = 0, a = 0, f = 1e300;
        for (int n : c) {
          const auto &pt = t.entries.at(n).front();
          p += pt.power_w;
          a += pt.area_mm2;
          f = std::min(f, pt.rate_sps);
        }
        const double fom = p / (std::ldexp(1.0, reso) * f);
        const bool better = fom < win.fom_j * (1 - 1e-12) ||
                            (std::abs(fom - win.fom_j) <= 1e-12 * fom && a < win.area_mm2 * (1 - 1e-12));
        CHECK_FALSE(better);
      }
      for (std::size_t k = 1; k < ranked.size(); ++k)
        CHECK_FALSE(dse_less(ranked[k], ranked[k - 1]));
    }
  }
}

TEST_CASE("operating points") {
  CostTable t;
  // The 2-bit stage can run fast at high power or slowly and cheaply.
  t.entries[1] = {{1e-3, 1e9, 0.01}};
  t.entries[2] = {{8e-3, 1e9, 0.03}, {2e-3, 0.5e9, 0.02}};
  t.entries[3] = {{20e-3, 1e9, 0.05}};
  const auto r = evaluate_candidate({2, 1}, t, EnobSource::assumed);
  // 1 GS/s: 9 mW / (8 * 1e9); 0.5 GS/s: 3 mW / (8 * 0.5e9).
  CHECK(r.fom_j == doctest::Approx(std::min(9e-3 / 8e9, 3e-3 / 4e9)));
  CHECK(r.rate_sps == doctest::Approx(0.5e9));
  CHECK(r.operating_points == std::vector<std::size_t>{1, 0});
  CostTable bad = t;
  bad.entries[2].push_back({-1.0, 1e9, 0.1});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("ENOB source names") {
  CHECK(enob_source_from_string("assumed") == EnobSource::assumed);
  CHECK(to_string(EnobSource::simulated) == "simulated");
  CHECK_THROWS_AS(enob_source_from_string("guess"), ConfigError);
}

}
