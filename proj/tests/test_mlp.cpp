#include "nnadc/errors.hpp"
#include "nnadc/mlp.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace nnadc;

namespace {

const DeviceGrid grid3{1e-6, 8e-6, 3};

MlpParams random_params(std::size_t in, std::size_t hid, std::size_t out, std::mt19937_64 &rng,
                        std::size_t family_size) {
  std::uniform_real_distribution<double> w(-0.25, 0.25), b(0.0, 0.3);
  std::uniform_int_distribution<std::size_t> pick(0, family_size - 1);
  MlpParams p(in, hid, out);
  for (auto &x : p.w1.flat())
    x = w(rng);
  for (auto &x : p.w2.flat())
    x = w(rng);
  for (auto &x : p.v1)
    x = b(rng);
  for (auto &x : p.v2)
    x = b(rng);
  for (auto &a : p.vtc_assignment)
    a = pick(rng);
  return p;
}

Batch random_batch(std::size_t n, std::size_t in, std::size_t out, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Batch b{Matrix(n, in), Matrix(n, out)};
  for (auto &x : b.inputs.flat())
    x = u(rng);
  for (auto &x : b.targets.flat())
    x = u(rng);
  return b;
}

double batch_loss(const MlpParams &p, const Batch &b, const VtcFamily &fam, const Head &head) {
  return loss(forward_batch(p, b.inputs, fam, head, Mode::train), b.targets);
}

} // namespace

TEST_SUITE("mlp") {

TEST_CASE("zero weights put every hidden neuron at the VTC midpoint") {
  const VtcParams v{0.5, 0.05, 1.0, 0.0};
  VtcFamily fam;
  fam.members = {v};
  MlpParams p(1, 3, 3);
  for (auto &b : p.v1)
    b = 0.5;
  // Identity output layer exposes the hidden outputs directly.
  for (std::size_t j = 0; j < 3; ++j)
    p.w2(j, j) = 1.0;
  const Head head{HeadKind::residue, 1.0, 1.0};
  for (double x : {0.0, 0.4, 1.0})
    for (double h : forward_stage(p, std::vector<double>{x}, fam, head, Mode::train))
      CHECK(h == doctest::Approx(0.5));
}

TEST_CASE("crossbar forward matches the parameter forward") {
  std::mt19937_64 rng(17);
  const auto fam = sample_family(10, default_vtc_variation(1.0), 3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = project(random_params(1 + trial % 3, 4, 2, rng, 10), grid3, 1.0);
    const auto back = from_crossbar(to_crossbar(p, grid3, 1.0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Head head{HeadKind::residue, 1.0, 1.0};
    for (int k = 0; k < 20; ++k) {
      std::vector<double> x(p.inputs());
      for (auto &e : x)
        e = u(rng);
      const auto a = forward_stage(p, x, fam, head, Mode::train);
      const auto b = forward_stage(back, x, fam, head, Mode::train);
      for (std::size_t o = 0; o < a.size(); ++o)
        CHECK(std::abs(a[o] - b[o]) < 1e-9);
    }
  }
}

TEST_CASE("forward errors") {
  VtcFamily fam;
  fam.members = {nominal_vtc(1.0)};
  MlpParams p(1, 2, 1);
  p.vtc_assignment = {0, 3};
  CHECK_THROWS_AS(forward_stage(p, std::vector<double>{0.5}, fam, {}, Mode::infer), ConfigError);
  p.vtc_assignment = {0, 0};
  CHECK_THROWS_AS(forward_stage(p, std::vector<double>{0.5, 0.1}, fam, {}, Mode::infer), ShapeError);
}

TEST_CASE("heads") {
  VtcFamily fam;
  fam.members = {nominal_vtc(1.0)};
  MlpParams p(1, 1, 1);
  p.v2[0] = 0.52;
  const Head cmp{HeadKind::subadc, 1.0, 1.0, 0.01};
  CHECK(forward_stage(p, std::vector<double>{0.0}, fam, cmp, Mode::infer)[0] == 1.0);
  CHECK(forward_stage(p, std::vector<double>{0.0}, fam, cmp, Mode::train)[0] ==
        doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
  p.v2[0] = 0.2;
  const Head res{HeadKind::residue, 1.0, 10.0};
  CHECK(forward_stage(p, std::vector<double>{0.0}, fam, res, Mode::infer)[0] == 1.0);
  CHECK(forward_stage(p, std::vector<double>{0.0}, fam, res, Mode::train)[0] == doctest::Approx(2.0));
}

TEST_CASE("loss") {
  Matrix a(1, 1), b(1, 1);
  a(0, 0) = 0.4;
  b(0, 0) = 0.5;
  CHECK(loss(a, b) == doctest::Approx(0.01));
  CHECK(loss(a, a) == 0.0);
  Matrix c(2, 1), d(2, 1);
  c(0, 0) = 0.4;
  d(0, 0) = 0.5;
  c(1, 0) = 0.8;
  d(1, 0) = 0.8;
  CHECK(loss(c, d) == doctest::Approx(0.005));
  CHECK_THROWS_AS(loss(a, c), ShapeError);
}

TEST_CASE("backprop matches central differences") {
  std::mt19937_64 rng(31);
  const auto fam = sample_family(8, default_vtc_variation(1.0, 0.5), 4);
  for (int trial = 0; trial < 20; ++trial) {
    const bool sub = trial % 2 == 0;
    const std::size_t in = 1 + trial % 4, hid = 2 + trial % 5, out = sub ? 1 + trial % 3 : 1;
    const Head head = sub ? Head{HeadKind::subadc, 1.0, 1.0, 0.2} : Head{HeadKind::residue, 1.0, 2.0};
    auto p = random_params(in, hid, out, rng, fam.size());
    const auto batch = random_batch(16, in, out, rng);
    Gradients g(p);
    const double l = backprop(p, batch, fam, head, p.vtc_assignment, g);
    CHECK(l == doctest::Approx(batch_loss(p, batch, fam, head)));
    const double h = 1e-6;
    auto blocks = p.blocks();
    const auto gb = g.blocks();
    for (std::size_t blk = 0; blk < blocks.size(); ++blk)
      for (std::size_t k = 0; k < blocks[blk].size(); ++k) {
        const double keep = blocks[blk][k];
        blocks[blk][k] = keep + h;
        const double up = batch_loss(p, batch, fam, head);
        blocks[blk][k] = keep - h;
        const double down = batch_loss(p, batch, fam, head);
        blocks[blk][k] = keep;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(gb[blk][k] - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
      }
  }
}

TEST_CASE("last-layer bias gradient and zero-loss batch") {
  std::mt19937_64 rng(6);
  const auto fam = sample_family(4, default_vtc_variation(1.0, 0.5), 9);
  auto p = random_params(2, 3, 1, rng, 4);
  auto batch = random_batch(10, 2, 1, rng);
  const Head head{HeadKind::residue, 1.0, 1.0};
  Gradients g(p);
  backprop(p, batch, fam, head, p.vtc_assignment, g);
  const auto out = forward_batch(p, batch.inputs, fam, head, Mode::train);
  double expect = 0;
  for (std::size_t b = 0; b < 10; ++b)
    expect += 2 * (out(b, 0) - batch.targets(b, 0));
  CHECK(g.v2[0] == doctest::Approx(expect / 10));

  batch.targets = out;
  CHECK(backprop(p, batch, fam, head, p.vtc_assignment, g) == doctest::Approx(0.0));
  for (const auto blk : g.blocks())
    for (double x : blk)
      CHECK(std::abs(x) < 1e-15);
}

TEST_CASE("adam") {
  std::mt19937_64 rng(2);
  auto p = random_params(1, 2, 1, rng, 1);
  const auto before = p;
  AdamState st(p);
  Gradients zero(p);
  adam_step(p, zero, st, 1e-3, {});
  for (std::size_t b = 0; b < 4; ++b)
    CHECK(std::equal(p.blocks()[b].begin(), p.blocks()[b].end(), before.blocks()[b].begin()));

  Gradients g(p);
  g.v2[0] = 0.7;
  g.w1(1, 0) = -3.0;
  AdamState fresh(p);
  adam_step(p, g, fresh, 1e-3, {});
  CHECK(p.v2[0] - before.v2[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(p.w1(1, 0) - before.w1(1, 0) == doctest::Approx(1e-3).epsilon(1e-6));

  // Scalar convergence on (w - 0.3)^2, carried in v2.
  MlpParams s(1, 1, 1);
  AdamState ss(s);
  int steps = 0;
  while (std::abs(s.v2[0] - 0.3) >= 1e-3 && steps < 2000) {
    Gradients gs(s);
    gs.v2[0] = 2 * (s.v2[0] - 0.3);
    adam_step(s, gs, ss, 1e-2, {});
    ++steps;
  }
  CHECK(std::abs(s.v2[0] - 0.3) < 1e-3);
}

TEST_CASE("projection") {
  // w_max 0.5 at fan-in 1 needs g_on = 3 g_off; the grid is {±1/14, ±3/14, ±5/14, ±7/14}.
  const DeviceGrid g{1e-6, 3e-6, 3};
  CHECK(g.w_max(1) == doctest::Approx(0.5));
  CHECK(quantize_weight(0.13, g, 1) == doctest::Approx(0.0714).epsilon(1e-3));

  std::mt19937_64 rng(13);
  for (int a = 1; a <= 7; ++a) {
    const DeviceGrid ga{1e-6, 8e-6, a};
    for (int trial = 0; trial < 10; ++trial) {
      auto p = random_params(1 + trial % 4, 3 + trial % 5, 1 + trial % 3, rng, 1);
      for (auto &x : p.w1.flat())
        x *= 4;  // push some entries past the clip bound
      const auto q = project(p, ga, 1.0);
      CHECK(is_projected(q, ga, 1.0));
      const auto qq = project(q, ga, 1.0);
      for (std::size_t b = 0; b < 4; ++b)
        CHECK(std::equal(qq.blocks()[b].begin(), qq.blocks()[b].end(), q.blocks()[b].begin()));
      const double wm1 = ga.w_max(static_cast<int>(q.inputs() + 1));
      for (std::size_t j = 0; j < q.hidden(); ++j) {
        double sum = std::abs(q.v1[j]);
        for (std::size_t i = 0; i < q.inputs(); ++i) {
          CHECK(std::abs(q.w1(j, i)) <= wm1 * (1 + 1e-12));
          sum += std::abs(q.w1(j, i));
        }
        CHECK(sum < 1.0);
      }
      const auto net = to_crossbar(q, ga, 1.0);
      CHECK(net.layer1.on_grid());
      CHECK(net.layer2.on_grid());
    }
  }
}

}
