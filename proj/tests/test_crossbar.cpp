#include "nnadc/crossbar.hpp"
#include "nnadc/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nnadc;

namespace {

const DeviceGrid grid3{1e-6, 8e-6, 3};

Matrix random_on_grid(std::size_t rows, std::size_t cols, const DeviceGrid &g, std::mt19937_64 &rng) {
  std::uniform_int_distribution<int> lvl(0, g.level_count() - 1);
  Matrix w(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      w(r, c) = g.weight_of_level(lvl(rng), static_cast<int>(rows));
  return w;
}

} // namespace

TEST_SUITE("crossbar") {

TEST_CASE("grid levels") {
  CHECK(grid3.level(0) == 1e-6);
  CHECK(grid3.level(7) == doctest::Approx(8e-6));
  CHECK(grid3.level(4) == doctest::Approx(5e-6));
  CHECK(grid3.w_max(3) == doctest::Approx(7.0 / 27.0));
  DeviceGrid bad = grid3;
  bad.g_on = 0.5e-6;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = grid3;
  bad.precision_bits = 8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("weights from conductances") {
  CrossbarLayer l(2, 1, DeviceGrid{1e-6, 300e-6, 3}, 0.0);
  l.pair(0, 0) = {200e-6, 100e-6};
  l.pair(1, 0) = {100e-6, 100e-6};
  const auto w = weights_from_conductances(l);
  CHECK(w.weights(0, 0) == doctest::Approx(0.2));
  CHECK(w.weights(1, 0) == doctest::Approx(0.0));
  CHECK(w.offsets[0] == doctest::Approx(0.0));

  CrossbarLayer sym(3, 2, grid3, 1.0);
  for (auto &p : sym.pairs())
    p = {4e-6, 4e-6};
  const auto z = weights_from_conductances(sym);
  for (double x : z.weights.flat())
    CHECK(x == 0.0);

  sym.pair(1, 1).upper = 0.0;
  CHECK_THROWS_AS(weights_from_conductances(sym), DeviceError);
}

TEST_CASE("column constraint at extreme levels") {
  // Every complementary column, including all-extreme ones, sums below 1.
  for (int a = 1; a <= 7; ++a) {
    DeviceGrid g{1e-6, 8e-6, a};
    for (std::size_t rows = 1; rows <= 4; ++rows)
      for (int mask = 0; mask < (1 << rows); ++mask) {
        CrossbarLayer l(rows, 1, g, 1.0);
        for (std::size_t r = 0; r < rows; ++r)
          l.pair(r, 0) = (mask >> r) & 1 ? DevicePair{g.g_on, g.g_off} : DevicePair{g.g_off, g.g_on};
        const auto w = weights_from_conductances(l);
        double sum = 0;
        for (std::size_t r = 0; r < rows; ++r)
          sum += std::abs(w.weights(r, 0));
        CHECK(sum < 1.0);
        CHECK(sum == doctest::Approx(7.0 / 9.0));
      }
  }
}

TEST_CASE("vmm") {
  // One input row plus a bias row whose pair is balanced.
  CrossbarLayer l(2, 1, DeviceGrid{1e-6, 300e-6, 3}, 1.0);
  l.pair(0, 0) = {200e-6, 100e-6};
  l.pair(1, 0) = {100e-6, 100e-6};
  CHECK(vmm(l, std::vector<double>{1.0}, 0.7)[0] == doctest::Approx(0.2));
  CrossbarLayer zero(3, 2, grid3, 1.0);
  for (auto &p : zero.pairs())
    p = {3e-6, 3e-6};
  for (double y : vmm(zero, std::vector<double>{0.4, 0.9}, 1.0))
    CHECK(y == 0.0);
  CHECK_THROWS_AS(vmm(l, std::vector<double>{1.0, 0.7}, 0.0), ShapeError);
}

TEST_CASE("vmm matches a naive product and is linear") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> g(1e-6, 8e-6);
  CrossbarLayer l(6, 4, grid3, 1.0);
  for (auto &p : l.pairs())
    p = {g(rng), g(rng)};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(5), y(5);
    for (auto &e : x)
      e = u(rng);
    for (auto &e : y)
      e = u(rng);
    const double vb = u(rng);
    const auto out = vmm(l, x, vb);
    for (std::size_t j = 0; j < 4; ++j) {
      double sigma = 0, acc = 0;
      for (std::size_t k = 0; k < 6; ++k)
        sigma += l.pair(k, j).upper + l.pair(k, j).lower;
      for (std::size_t k = 0; k < 6; ++k)
        acc += (l.pair(k, j).upper - l.pair(k, j).lower) / sigma * (k < 5 ? x[k] : vb);
      CHECK(std::abs(out[j] - acc) < 1e-12);
    }
    const double a = 0.3, b = -1.7;
    std::vector<double> mix(5);
    for (std::size_t k = 0; k < 5; ++k)
      mix[k] = a * x[k] + b * y[k];
    const auto ox = vmm(l, x, 0.0), oy = vmm(l, y, 0.0), om = vmm(l, mix, 0.0);
    for (std::size_t j = 0; j < 4; ++j)
      CHECK(std::abs(om[j] - (a * ox[j] + b * oy[j])) < 1e-10);
  }
}

TEST_CASE("quantize_weight") {
  const double wm = grid3.w_max(3);
  CHECK(quantize_weight(0.0, grid3, 3) == doctest::Approx(wm / 7));
  CHECK(quantize_weight(0.2, grid3, 3) == doctest::Approx(5.0 / 27.0));
  CHECK(quantize_weight(10 * wm, grid3, 3) == doctest::Approx(wm));
  CHECK(quantize_weight(-10 * wm, grid3, 3) == doctest::Approx(-wm));
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int a = 1; a <= 7; ++a) {
    DeviceGrid g{1e-6, 8e-6, a};
    for (int k = 0; k < 500; ++k) {
      const int fan = 1 + k % 9;
      const double q = quantize_weight(u(rng), g, fan);
      CHECK(quantize_weight(q, g, fan) == q);
      CHECK(level_of_weight(q, g, fan) >= 0);
    }
  }
}

TEST_CASE("instantiate_conductances") {
  Matrix w(3, 1);
  w(0, 0) = grid3.weight_of_level(4, 3);
  w(1, 0) = grid3.weight_of_level(7, 3);
  const std::vector<double> offsets{grid3.weight_of_level(0, 3) * 1.0};
  const Matrix body = [&] {
    Matrix b(2, 1);
    b(0, 0) = w(0, 0);
    b(1, 0) = w(1, 0);
    return b;
  }();
  const auto l = instantiate_conductances(body, offsets, grid3, 1.0);
  CHECK(l.pair(0, 0).upper == doctest::Approx(5e-6));
  CHECK(l.pair(0, 0).lower == doctest::Approx(4e-6));
  CHECK(l.pair(1, 0).upper == doctest::Approx(8e-6));
  CHECK(l.pair(1, 0).lower == doctest::Approx(1e-6));
  CHECK(l.on_grid());
  CHECK(l.complementary());

  Matrix off(2, 1);
  off(0, 0) = 0.123;
  CHECK_THROWS_AS(instantiate_conductances(off, std::vector<double>{0.0}, grid3, 1.0),
                  PrecisionError);
}

TEST_CASE("instantiate/read back round trip") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const DeviceGrid g{1e-6, 8e-6, 1 + trial % 7};
    const std::size_t inputs = 1 + trial % 5, cols = 1 + trial % 4;
    const auto full = random_on_grid(inputs + 1, cols, g, rng);
    Matrix body(inputs, cols);
    std::vector<double> offsets(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      for (std::size_t r = 0; r < inputs; ++r)
        body(r, c) = full(r, c);
      offsets[c] = full(inputs, c) * 0.8;
    }
    const auto l = instantiate_conductances(body, offsets, g, 0.8);
    const auto back = weights_from_conductances(l);
    for (std::size_t r = 0; r <= inputs; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        CHECK(std::abs(back.weights(r, c) - full(r, c)) <= 1e-12 * std::abs(full(r, c)) + 1e-15);
    for (std::size_t c = 0; c < cols; ++c)
      CHECK(back.offsets[c] == doctest::Approx(offsets[c]).epsilon(1e-12));
  }
}

TEST_CASE("perturb_resistances") {
  CrossbarLayer l(4, 3, grid3, 1.0);
  for (auto &p : l.pairs())
    p = {5e-6, 4e-6};
  const auto same = perturb_resistances(l, {0.0, 7});
  CHECK(std::equal(same.pairs().begin(), same.pairs().end(), l.pairs().begin()));
  const auto a = perturb_resistances(l, {0.05, 7});
  const auto b = perturb_resistances(l, {0.05, 7});
  CHECK(std::equal(a.pairs().begin(), a.pairs().end(), b.pairs().begin()));
  CHECK_FALSE(std::equal(a.pairs().begin(), a.pairs().end(), l.pairs().begin()));
  // R = 10 kOhm scaled by e^0.05.
  CHECK(1e4 * std::exp(0.05) == doctest::Approx(10512.7).epsilon(1e-5));
}

TEST_CASE("perturbation statistics") {
  CrossbarLayer l(501, 100, grid3, 1.0);
  for (auto &p : l.pairs())
    p = {2e-6, 7e-6};
  const auto q = perturb_resistances(l, {0.05, 99});
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < l.pairs().size() && n < 100000; ++k)
    for (double x : {std::log(l.pairs()[k].upper / q.pairs()[k].upper),  // ln(R'/R)
                     std::log(l.pairs()[k].lower / q.pairs()[k].lower)}) {
      sum += x;
      sq += x * x;
      ++n;
    }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.001);
  CHECK(std::abs(sd - 0.05) < 0.002);
}

}
