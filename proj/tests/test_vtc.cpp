#include "nnadc/errors.hpp"
#include "nnadc/vtc.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

using namespace nnadc;

TEST_SUITE("vtc") {

TEST_CASE("midpoint, rails and a worked point") {
  const VtcParams p{0.75, 0.05, 1.5, 0.0};
  CHECK(vtc_eval(p, 0.75) == doctest::Approx(0.75));
  CHECK(vtc_eval(p, -1e6) == doctest::Approx(1.5));
  CHECK(vtc_eval(p, 1e6) == doctest::Approx(0.0));
  // logistic(-1) * 1.5 = 0.4034, i.e. 0.75 - 0.3466.
  CHECK(vtc_eval(p, 0.80) == doctest::Approx(0.75 - 0.3466).epsilon(1e-3));
  CHECK(vtc_eval(p, 0.70) == doctest::Approx(0.75 + 0.3466).epsilon(1e-3));
}

TEST_CASE("derivative") {
  const VtcParams p{0.75, 0.05, 1.5, 0.0};
  CHECK(vtc_derivative(p, 0.75) == doctest::Approx(-7.5));
  CHECK(std::abs(vtc_derivative(p, 0.75 + 2.0)) < 1e-6);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.45, 1.05);
  const double h = 1e-6;
  for (int k = 0; k < 100; ++k) {
    const double v = u(rng);
    const double fd = (vtc_eval(p, v + h) - vtc_eval(p, v - h)) / (2 * h);
    CHECK(vtc_derivative(p, v) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("strictly decreasing for random parameters") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> vm(0.1, 0.9), s(0.01, 0.2);
  for (int k = 0; k < 100; ++k) {
    const VtcParams p{vm(rng), s(rng), 1.0, 0.0};
    double prev = vtc_eval(p, p.v_m - 3 * p.s);
    for (int i = 1; i <= 600; ++i) {
      const double y = vtc_eval(p, p.v_m - 3 * p.s + i * p.s * 0.01);
      CHECK(y < prev);
      prev = y;
    }
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((VtcParams{0.5, 0.0, 1.0, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((VtcParams{0.5, 0.1, 0.0, 1.0}.validate()), ConfigError);
}

TEST_CASE("family sampling") {
  VtcVariation none{nominal_vtc(1.0), 0.0, 0.0};
  const auto flat = sample_family(10, none, 1);
  for (const auto &m : flat.members)
    CHECK(m == none.nominal);

  VtcVariation var{nominal_vtc(1.0), 0.03, 0.1};
  const auto a = sample_family(100, var, 77);
  const auto b = sample_family(100, var, 77);
  CHECK(a.members == b.members);
  double sum = 0, sq = 0;
  for (const auto &m : a.members) {
    sum += m.v_m;
    sq += m.v_m * m.v_m;
    CHECK(m.s > 0.0);
  }
  const double mean = sum / 100;
  const double sd = std::sqrt((sq - 100 * mean * mean) / 99);
  CHECK(sd == doctest::Approx(0.03).epsilon(0.2));
  CHECK_THROWS_AS(sample_family(0, var, 1), ConfigError);
}

TEST_CASE("random picks are uniform and seeded") {
  const auto fam = sample_family(100, default_vtc_variation(1.0), 5);
  std::mt19937_64 rng(12);
  std::vector<int> counts(100);
  for (int k = 0; k < 100000; ++k)
    ++counts[pick_random_index(fam, rng)];
  for (int c : counts) {
    CHECK(c > 850);
    CHECK(c < 1150);
  }
  std::mt19937_64 r1(3), r2(3);
  for (int k = 0; k < 50; ++k)
    CHECK(pick_random_index(fam, r1) == pick_random_index(fam, r2));
  const auto one = sample_family(1, default_vtc_variation(1.0), 5);
  for (int k = 0; k < 10; ++k)
    CHECK(pick_random(one, rng) == one.members[0]);
}

}
