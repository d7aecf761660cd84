#include "nnadc/mlp.hpp"

#include "nnadc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nnadc {

MlpParams::MlpParams(std::size_t inputs, std::size_t hidden, std::size_t outputs)
    : w1(hidden, inputs), v1(hidden, 0.0), w2(outputs, hidden), v2(outputs, 0.0),
      vtc_assignment(hidden, 0) {}

std::vector<std::span<double>> MlpParams::blocks() {
  return {w1.flat(), std::span<double>(v1), w2.flat(), std::span<double>(v2)};
}

std::vector<std::span<const double>> MlpParams::blocks() const {
  return {w1.flat(), std::span<const double>(v1), w2.flat(), std::span<const double>(v2)};
}

Gradients::Gradients(const MlpParams &shape)
    : w1(shape.hidden(), shape.inputs()), v1(shape.hidden(), 0.0),
      w2(shape.outputs(), shape.hidden()), v2(shape.outputs(), 0.0) {}

std::vector<std::span<double>> Gradients::blocks() {
  return {w1.flat(), std::span<double>(v1), w2.flat(), std::span<double>(v2)};
}

std::vector<std::span<const double>> Gradients::blocks() const {
  return {w1.flat(), std::span<const double>(v1), w2.flat(), std::span<const double>(v2)};
}

namespace {

std::span<const std::size_t> resolve_assignment(const MlpParams &params,
                                                std::span<const std::size_t> assignment,
                                                const VtcFamily &family) {
  auto a = assignment.empty() ? std::span<const std::size_t>(params.vtc_assignment) : assignment;
  if (a.size() != params.hidden())
    throw ConfigError("VTC assignment needs one entry per hidden neuron");
  for (auto idx : a)
    if (idx >= family.size())
      throw ConfigError("VTC assignment index " + std::to_string(idx) +
                        " outside family of size " + std::to_string(family.size()));
  return a;
}

double logistic(double x) noexcept {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double apply_head(const Head &head, Mode mode, double y) noexcept {
  if (head.kind == HeadKind::residue)
    return mode == Mode::infer ? std::clamp(head.gain * y, 0.0, head.vdd) : head.gain * y;
  if (mode == Mode::infer)
    return y >= 0.5 * head.vdd ? head.vdd : 0.0;
  return head.vdd * logistic((y - 0.5 * head.vdd) / head.surrogate_width);
}

} // namespace

std::vector<double> forward_stage(const MlpParams &params, std::span<const double> inputs,
                                  const VtcFamily &family, const Head &head, Mode mode,
                                  std::span<const std::size_t> assignment) {
  if (inputs.size() != params.inputs())
    throw ShapeError("network expects " + std::to_string(params.inputs()) + " inputs, got " +
                     std::to_string(inputs.size()));
  const auto a = resolve_assignment(params, assignment, family);
  std::vector<double> h(params.hidden());
  for (std::size_t j = 0; j < params.hidden(); ++j) {
    double z = params.v1[j];
    for (std::size_t i = 0; i < params.inputs(); ++i)
      z += params.w1(j, i) * inputs[i];
    h[j] = vtc_eval(family.members[a[j]], z);
  }
  std::vector<double> out(params.outputs());
  for (std::size_t o = 0; o < params.outputs(); ++o) {
    double y = params.v2[o];
    for (std::size_t j = 0; j < params.hidden(); ++j)
      y += params.w2(o, j) * h[j];
    out[o] = apply_head(head, mode, y);
  }
  return out;
}

Matrix forward_batch(const MlpParams &params, const Matrix &inputs, const VtcFamily &family,
                     const Head &head, Mode mode, std::span<const std::size_t> assignment) {
  if (inputs.cols() != params.inputs())
    throw ShapeError("batch width does not match network inputs");
  const auto a = resolve_assignment(params, assignment, family);
  Matrix out(inputs.rows(), params.outputs());
  std::vector<double> h(params.hidden());
  for (std::size_t b = 0; b < inputs.rows(); ++b) {
    const auto x = inputs.row(b);
    for (std::size_t j = 0; j < params.hidden(); ++j) {
      double z = params.v1[j];
      for (std::size_t i = 0; i < params.inputs(); ++i)
        z += params.w1(j, i) * x[i];
      h[j] = vtc_eval(family.members[a[j]], z);
    }
    for (std::size_t o = 0; o < params.outputs(); ++o) {
      double y = params.v2[o];
      for (std::size_t j = 0; j < params.hidden(); ++j)
        y += params.w2(o, j) * h[j];
      out(b, o) = apply_head(head, mode, y);
    }
  }
  return out;
}

double loss(const Matrix &outputs, const Matrix &targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw ShapeError("loss needs outputs and targets of equal shape");
  if (outputs.rows() == 0)
    return 0.0;
  double acc = 0.0;
  const auto o = outputs.flat();
  const auto t = targets.flat();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double d = t[i] - o[i];
    acc += d * d;
  }
  return acc / static_cast<double>(outputs.rows());
}

double backprop(const MlpParams &params, const Batch &batch, const VtcFamily &family,
                const Head &head, std::span<const std::size_t> assignment, Gradients &grads) {
  const std::size_t n_in = params.inputs();
  const std::size_t n_hid = params.hidden();
  const std::size_t n_out = params.outputs();
  if (batch.inputs.cols() != n_in || batch.targets.cols() != n_out ||
      batch.inputs.rows() != batch.targets.rows())
    throw ShapeError("batch shape does not match network");
  const auto a = resolve_assignment(params, assignment, family);

  for (auto block : grads.blocks())
    std::fill(block.begin(), block.end(), 0.0);

  std::vector<const VtcParams *> vtc(n_hid);
  for (std::size_t j = 0; j < n_hid; ++j)
    vtc[j] = &family.members[a[j]];

  std::vector<double> h(n_hid), dh_dz(n_hid), dz(n_hid), dy(n_out);
  const double inv_batch = 1.0 / static_cast<double>(batch.inputs.rows());
  double total = 0.0;

  for (std::size_t b = 0; b < batch.inputs.rows(); ++b) {
    const auto x = batch.inputs.row(b);
    const auto t = batch.targets.row(b);
    for (std::size_t j = 0; j < n_hid; ++j) {
      double z = params.v1[j];
      for (std::size_t i = 0; i < n_in; ++i)
        z += params.w1(j, i) * x[i];
      // Logistic evaluated once for both the value and the slope.
      const auto &p = *vtc[j];
      const double arg = (p.v_m - z) / p.s;
      const double l = logistic(arg);
      h[j] = p.v_low + (p.v_high - p.v_low) * l;
      dh_dz[j] = -(p.v_high - p.v_low) * l * (1.0 - l) / p.s;
    }
    for (std::size_t o = 0; o < n_out; ++o) {
      double y = params.v2[o];
      for (std::size_t j = 0; j < n_hid; ++j)
        y += params.w2(o, j) * h[j];
      double out, dout_dy;
      if (head.kind == HeadKind::residue) {
        out = head.gain * y;
        dout_dy = head.gain;
      } else {
        const double l = logistic((y - 0.5 * head.vdd) / head.surrogate_width);
        out = head.vdd * l;
        dout_dy = head.vdd * l * (1.0 - l) / head.surrogate_width;
      }
      const double err = out - t[o];
      total += err * err;
      dy[o] = 2.0 * err * inv_batch * dout_dy;
    }
    std::fill(dz.begin(), dz.end(), 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      grads.v2[o] += dy[o];
      for (std::size_t j = 0; j < n_hid; ++j) {
        grads.w2(o, j) += dy[o] * h[j];
        dz[j] += dy[o] * params.w2(o, j);
      }
    }
    for (std::size_t j = 0; j < n_hid; ++j) {
      const double g = dz[j] * dh_dz[j];
      grads.v1[j] += g;
      for (std::size_t i = 0; i < n_in; ++i)
        grads.w1(j, i) += g * x[i];
    }
  }
  return total * inv_batch;
}

void adam_step(MlpParams &params, const Gradients &grads, AdamState &state, double lr,
               const AdamConfig &config) {
  ++state.step;
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  auto p = params.blocks();
  const auto g = grads.blocks();
  auto m = state.m.blocks();
  auto v = state.v.blocks();
  for (std::size_t blk = 0; blk < p.size(); ++blk) {
    for (std::size_t i = 0; i < p[blk].size(); ++i) {
      const double gi = g[blk][i];
      m[blk][i] = config.beta1 * m[blk][i] + (1.0 - config.beta1) * gi;
      v[blk][i] = config.beta2 * v[blk][i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = m[blk][i] / c1;
      const double v_hat = v[blk][i] / c2;
      p[blk][i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

MlpParams project(const MlpParams &params, const DeviceGrid &grid, double vdd) {
  MlpParams out = params;
  const int fan1 = static_cast<int>(params.inputs() + 1);
  const int fan2 = static_cast<int>(params.hidden() + 1);
  for (auto &w : out.w1.flat())
    w = quantize_weight(w, grid, fan1);
  for (auto &v : out.v1)
    v = quantize_weight(v / vdd, grid, fan1) * vdd;
  for (auto &w : out.w2.flat())
    w = quantize_weight(w, grid, fan2);
  for (auto &v : out.v2)
    v = quantize_weight(v / vdd, grid, fan2) * vdd;
  return out;
}

bool is_projected(const MlpParams &params, const DeviceGrid &grid, double vdd) {
  const int fan1 = static_cast<int>(params.inputs() + 1);
  const int fan2 = static_cast<int>(params.hidden() + 1);
  for (auto w : params.w1.flat())
    if (level_of_weight(w, grid, fan1) < 0)
      return false;
  for (auto v : params.v1)
    if (level_of_weight(v / vdd, grid, fan1) < 0)
      return false;
  for (auto w : params.w2.flat())
    if (level_of_weight(w, grid, fan2) < 0)
      return false;
  for (auto v : params.v2)
    if (level_of_weight(v / vdd, grid, fan2) < 0)
      return false;
  return true;
}

CrossbarNetwork to_crossbar(const MlpParams &params, const DeviceGrid &grid, double vdd) {
  return {instantiate_conductances(params.w1.transposed(), params.v1, grid, vdd),
          instantiate_conductances(params.w2.transposed(), params.v2, grid, vdd),
          params.vtc_assignment};
}

MlpParams from_crossbar(const CrossbarNetwork &network) {
  const auto l1 = weights_from_conductances(network.layer1);
  const auto l2 = weights_from_conductances(network.layer2);
  const std::size_t inputs = network.layer1.inputs();
  const std::size_t hidden = network.layer1.cols();
  const std::size_t outputs = network.layer2.cols();
  if (network.layer2.inputs() != hidden)
    throw ShapeError("crossbar layers do not chain");
  MlpParams p(inputs, hidden, outputs);
  for (std::size_t j = 0; j < hidden; ++j) {
    for (std::size_t i = 0; i < inputs; ++i)
      p.w1(j, i) = l1.weights(i, j);
    p.v1[j] = l1.offsets[j];
  }
  for (std::size_t o = 0; o < outputs; ++o) {
    for (std::size_t j = 0; j < hidden; ++j)
      p.w2(o, j) = l2.weights(j, o);
    p.v2[o] = l2.offsets[o];
  }
  p.vtc_assignment = network.vtc_assignment;
  if (p.vtc_assignment.size() != hidden)
    p.vtc_assignment.assign(hidden, 0);
  return p;
}

} // namespace nnadc
