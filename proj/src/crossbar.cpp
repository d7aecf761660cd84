#include "nnadc/crossbar.hpp"

#include "nnadc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace nnadc {

void DeviceGrid::validate() const {
  if (!(g_off > 0.0))
    throw ConfigError("g_off must be positive");
  if (!(g_on > g_off))
    throw ConfigError("g_on must exceed g_off");
  if (precision_bits < 1 || precision_bits > 7)
    throw ConfigError("RRAM precision must be 1..7 bits");
}

double DeviceGrid::level(int a) const {
  if (a < 0 || a >= level_count())
    throw DomainError("grid level out of range");
  return g_off + a * (g_on - g_off) / (level_count() - 1);
}

double DeviceGrid::w_max(int fan_in) const {
  if (fan_in < 1)
    throw ConfigError("fan-in must be >= 1");
  return (g_on - g_off) / (fan_in * (g_on + g_off));
}

double DeviceGrid::weight_of_level(int a, int fan_in) const {
  const int top = level_count() - 1;
  return w_max(fan_in) * (2.0 * a - top) / top;
}

CrossbarLayer::CrossbarLayer(std::size_t rows, std::size_t cols, DeviceGrid grid,
                             double bias_voltage)
    : rows_(rows), cols_(cols), grid_(grid), bias_voltage_(bias_voltage),
      pairs_(rows * cols, DevicePair{grid.g_off, grid.g_off}) {
  if (rows < 1 || cols < 1)
    throw ShapeError("crossbar needs at least one row and one column");
}

namespace {

bool near_level(double g, const DeviceGrid &grid) {
  const double step = (grid.g_on - grid.g_off) / (grid.level_count() - 1);
  const double a = (g - grid.g_off) / step;
  const double nearest = std::round(a);
  return nearest >= 0 && nearest < grid.level_count() &&
         std::abs(a - nearest) * step <= 1e-9 * grid.g_on;
}

} // namespace

bool CrossbarLayer::on_grid() const {
  for (const auto &p : pairs_)
    if (!near_level(p.upper, grid_) || !near_level(p.lower, grid_))
      return false;
  return true;
}

bool CrossbarLayer::complementary() const {
  const double total = grid_.g_on + grid_.g_off;
  for (const auto &p : pairs_)
    if (std::abs(p.upper + p.lower - total) > 1e-9 * total)
      return false;
  return true;
}

LayerWeights weights_from_conductances(const CrossbarLayer &layer) {
  LayerWeights out{Matrix(layer.rows(), layer.cols()), std::vector<double>(layer.cols())};
  for (std::size_t j = 0; j < layer.cols(); ++j) {
    double column_total = 0.0;
    for (std::size_t k = 0; k < layer.rows(); ++k) {
      const auto &p = layer.pair(k, j);
      if (!(p.upper > 0.0) || !(p.lower > 0.0))
        throw DeviceError("non-positive conductance at row " + std::to_string(k) +
                          ", column " + std::to_string(j));
      column_total += p.upper + p.lower;
    }
    for (std::size_t k = 0; k < layer.rows(); ++k) {
      const auto &p = layer.pair(k, j);
      out.weights(k, j) = (p.upper - p.lower) / column_total;
    }
    out.offsets[j] = out.weights(layer.rows() - 1, j) * layer.bias_voltage();
  }
  return out;
}

std::vector<double> vmm(const LayerWeights &weights, std::span<const double> v_in,
                        double v_bias) {
  const auto &w = weights.weights;
  if (v_in.size() + 1 != w.rows())
    throw ShapeError("vmm input has " + std::to_string(v_in.size()) + " entries, layer expects " +
                     std::to_string(w.rows() - 1));
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t j = 0; j < w.cols(); ++j) {
    double acc = w(w.rows() - 1, j) * v_bias;
    for (std::size_t k = 0; k < v_in.size(); ++k)
      acc += w(k, j) * v_in[k];
    out[j] = acc;
  }
  return out;
}

std::vector<double> vmm(const CrossbarLayer &layer, std::span<const double> v_in,
                        double v_bias) {
  return vmm(weights_from_conductances(layer), v_in, v_bias);
}

double quantize_weight(double w, const DeviceGrid &grid, int fan_in) {
  const double w_max = grid.w_max(fan_in);
  const int top = grid.level_count() - 1;
  const double clipped = std::clamp(w, -w_max, w_max);
  // Level index a maps to w_max*(2a - top)/top; floor(x + 0.5) rounds
  // midpoints upward.
  const double a = (clipped / w_max * top + top) / 2.0;
  const int level = std::clamp(static_cast<int>(std::floor(a + 0.5)), 0, top);
  return grid.weight_of_level(level, fan_in);
}

int level_of_weight(double w, const DeviceGrid &grid, int fan_in, double rel_tol) {
  const double w_max = grid.w_max(fan_in);
  const int top = grid.level_count() - 1;
  const double a = (w / w_max * top + top) / 2.0;
  const double nearest = std::round(a);
  if (nearest < 0 || nearest > top)
    return -1;
  const auto level = static_cast<int>(nearest);
  if (std::abs(grid.weight_of_level(level, fan_in) - w) > rel_tol * w_max)
    return -1;
  return level;
}

CrossbarLayer instantiate_conductances(const Matrix &weights, std::span<const double> offsets,
                                       const DeviceGrid &grid, double bias_voltage) {
  grid.validate();
  if (offsets.size() != weights.cols())
    throw ShapeError("one offset per output column required");
  if (!(bias_voltage > 0.0))
    throw ConfigError("bias voltage must be positive");
  const std::size_t rows = weights.rows() + 1;
  const int fan_in = static_cast<int>(rows);
  const int top = grid.level_count() - 1;
  CrossbarLayer layer(rows, weights.cols(), grid, bias_voltage);
  for (std::size_t j = 0; j < weights.cols(); ++j) {
    for (std::size_t k = 0; k < rows; ++k) {
      const bool is_bias = k + 1 == rows;
      const double w = is_bias ? offsets[j] / bias_voltage : weights(k, j);
      const int a = level_of_weight(w, grid, fan_in);
      if (a < 0)
        throw PrecisionError(std::string(is_bias ? "offset" : "weight") + " " +
                             std::to_string(w) + " at row " + std::to_string(k) +
                             ", column " + std::to_string(j) + " is not on the " +
                             std::to_string(grid.precision_bits) + "-bit grid");
      layer.pair(k, j) = {grid.level(a), grid.level(top - a)};
    }
  }
  return layer;
}

CrossbarLayer perturb_resistances(const CrossbarLayer &layer, const PerturbationSpec &spec) {
  if (spec.sigma < 0.0)
    throw ConfigError("perturbation sigma must be >= 0");
  CrossbarLayer out = layer;
  if (spec.sigma == 0.0)
    return out;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> theta(0.0, spec.sigma);
  for (auto &p : out.pairs()) {
    p.upper /= std::exp(theta(rng));
    p.lower /= std::exp(theta(rng));
  }
  return out;
}

std::vector<double> column_abs_sums(const Matrix &weights) {
  std::vector<double> sums(weights.cols(), 0.0);
  for (std::size_t k = 0; k < weights.rows(); ++k)
    for (std::size_t j = 0; j < weights.cols(); ++j)
      sums[j] += std::abs(weights(k, j));
  return sums;
}

} // namespace nnadc
