#include "nnadc/errors.hpp"
#include "nnadc/metrics.hpp"
#include "nnadc/signal.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace nnadc;

namespace {

std::vector<double> tone(std::size_t n, double cycles, double amp, double offset) {
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k)
    x[k] = offset + amp * std::sin(2 * std::numbers::pi * cycles * k / n);
  return x;
}

} // namespace

TEST_SUITE("metrics") {

TEST_CASE("Parseval") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.3, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> x(1024);
    double time_power = 0;
    for (auto &e : x) {
      e = g(rng);
      time_power += e * e;
    }
    time_power /= 1024;
    const auto s = spectrum(x, 1.0);
    double sum = 0;
    for (double p : s.power)
      sum += p;
    CHECK(std::abs(sum - time_power) <= 1e-9 * time_power);
    double folded = 0;
    for (double p : s.one_sided())
      folded += p;
    CHECK(std::abs(folded - time_power) <= 1e-9 * time_power);
  }
}

TEST_CASE("spectrum shapes") {
  const std::vector<double> c(256, 0.7);
  const auto s = spectrum(c, 1.0);
  CHECK(s.power[0] == doctest::Approx(0.49));
  for (std::size_t k = 1; k < 256; ++k)
    CHECK(s.power[k] < 1e-25);

  const auto t = spectrum(tone(256, 9, 1.0, 0.0), 2.0);
  CHECK(t.signal_bin == 9);
  CHECK(t.bin_frequency(9) == doctest::Approx(9.0 * 2 / 256));
  for (std::size_t k = 0; k < 256; ++k) {
    if (k == 9 || k == 247)
      CHECK(t.power[k] == doctest::Approx(0.25));
    else
      CHECK(t.power[k] < 1e-25);
  }
  CHECK_THROWS_AS(spectrum(std::vector<double>(100, 0.0), 1.0), ShapeError);
}

TEST_CASE("ENOB formula") {
  CHECK(enob_from_sndr(49.92) == doctest::Approx(8.0));
  CHECK(enob_from_sndr(1.76) == 0.0);
}

TEST_CASE("unquantized sine") {
  const auto r = sndr_enob(tone(4096, 127, 0.5, 0.5), 1.0, 127.0 / 4096);
  CHECK(r.sndr_db > 120.0);
  CHECK(r.signal_bin == 127);
}

TEST_CASE("stuck output scores lowest") {
  const std::vector<double> x(4096, 0.25);
  CHECK(sndr_enob(x, 1.0, 127.0 / 4096).enob < 0.0);
}

TEST_CASE("incoherent tone is rejected") {
  const auto x = tone(4096, 127, 0.5, 0.5);
  CHECK_THROWS_AS(sndr_enob(x, 1.0, 127.5 / 4096), CoherenceError);
}

TEST_CASE("ideal quantizers") {
  // 6.02 M + 1.76 holds once quantization noise is roughly uniform.
  for (int m = 2; m <= 14; ++m)
    CHECK(ideal_quantizer_enob(m) == doctest::Approx(m).epsilon(0.1 / m));
  // A 1-bit quantizer turns the sine into a square wave whose harmonic power
  // is 1 - 8/pi^2 of the total, far below the 6.02 M + 1.76 estimate.
  const double sq = 8 / (std::numbers::pi * std::numbers::pi);
  CHECK(ideal_quantizer_enob(1) ==
        doctest::Approx(enob_from_sndr(10 * std::log10(sq / (1 - sq)))).epsilon(1e-3));
}

TEST_CASE("converter_enob matches the ideal quantizer through ideal_adc") {
  SineTest t;
  const auto conv = [](double v) {
    return (ideal_adc(v, 8, {}).value() + 0.5) / 256.0;
  };
  CHECK(converter_enob(conv, t).enob == doctest::Approx(ideal_quantizer_enob(8)).epsilon(1e-9));
  const auto out = converter_output([](double v) { return v; }, t);
  CHECK(out.size() == t.n);
  for (double v : out) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("residue_mse") {
  const auto g = residue_grid(1.0);
  REQUIRE(g.size() == 2048);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(2047.0 / 2048));
  const auto f = [](double v) { return v * v; };
  CHECK(residue_mse(f, f, 1.0) == 0.0);
  CHECK(residue_mse([&](double v) { return f(v) + 0.03; }, f, 1.0) == doctest::Approx(9e-4));

  const auto spec = default_stage_spec(1);
  const auto r = [&](double v) { return ideal_residue(v, ideal_stage_level(v, spec), spec); };
  const auto shifted = [&](double v) { return r(std::min(v + 1.0 / 2048, 1.0)); };
  double direct = 0;
  for (int k = 0; k < 2048; ++k) {
    const double v = k / 2048.0;
    const double d = shifted(v) - r(v);
    direct += d * d;
  }
  CHECK(residue_mse(shifted, r, 1.0) == doctest::Approx(direct / 2048));
  CHECK(residue_mse(shifted, r, 1.0) == residue_mse(r, shifted, 1.0));
  CHECK(residue_mse(shifted, r, 1.0) > 0.0);
}

TEST_CASE("MSE to ENOB sensitivity") {
  CHECK(mse_to_enob_sensitivity(8, 0.0) == doctest::Approx(ideal_quantizer_enob(8)));
  CHECK(std::abs(mse_to_enob_sensitivity(8, 0.0) - 8.0) <= 0.1);
  CHECK(mse_to_enob_sensitivity(8, 1e-6) >= 7.5);
  double prev = 1e9;
  for (double mse : {1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2}) {
    const double e = mse_to_enob_sensitivity(8, mse);
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
  CHECK_THROWS(mse_to_enob_sensitivity(8, -1.0));
}

}
