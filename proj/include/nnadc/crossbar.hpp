#pragma once

// Differential RRAM crossbar: each weight is a pair of devices in the upper
// and lower sub-arrays, normalized by the total conductance of its column.
// Pairs are complementary (g_U + g_L = g_on + g_off), which makes the column
// normalizer input-independent and yields exactly 2^A_R weight levels.

#include "nnadc/matrix.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nnadc {

struct DeviceGrid {
  double g_off = 1e-6;     // siemens
  double g_on = 8e-6;      // siemens
  int precision_bits = 3;  // A_R

  void validate() const;
  int level_count() const noexcept { return 1 << precision_bits; }
  /// Conductance of grid level a, a in [0, 2^A_R).
  double level(int a) const;
  /// Largest representable |w| for a column with `fan_in` device rows.
  double w_max(int fan_in) const;
  /// Weight realized by level a in the upper array and its complement in
  /// the lower array, for a column with `fan_in` rows.
  double weight_of_level(int a, int fan_in) const;
};

struct DevicePair {
  double upper = 0.0; // g_U, siemens
  double lower = 0.0; // g_L, siemens

  friend bool operator==(const DevicePair &, const DevicePair &) = default;
};

/// Rows are inputs followed by one bias row driven by `bias_voltage`.
class CrossbarLayer {
public:
  CrossbarLayer() = default;
  CrossbarLayer(std::size_t rows, std::size_t cols, DeviceGrid grid, double bias_voltage);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t inputs() const noexcept { return rows_ - 1; }
  const DeviceGrid &grid() const noexcept { return grid_; }
  double bias_voltage() const noexcept { return bias_voltage_; }

  DevicePair &pair(std::size_t row, std::size_t col) { return pairs_[row * cols_ + col]; }
  const DevicePair &pair(std::size_t row, std::size_t col) const {
    return pairs_[row * cols_ + col];
  }
  std::span<const DevicePair> pairs() const noexcept { return pairs_; }
  std::span<DevicePair> pairs() noexcept { return pairs_; }

  /// True when every device sits on a grid level (1e-9 relative slack).
  bool on_grid() const;
  bool complementary() const;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  DeviceGrid grid_;
  double bias_voltage_ = 1.0;
  std::vector<DevicePair> pairs_;
};

struct LayerWeights {
  Matrix weights;               // rows x cols, bias row last
  std::vector<double> offsets;  // bias-row weight times bias voltage
};

LayerWeights weights_from_conductances(const CrossbarLayer &layer);

/// Sum over input rows of W*v plus the bias-row term.
std::vector<double> vmm(const CrossbarLayer &layer, std::span<const double> v_in,
                        double v_bias);

/// Same product on already-extracted weights.
std::vector<double> vmm(const LayerWeights &weights, std::span<const double> v_in,
                        double v_bias);

/// Clip to +-w_max(fan_in) and round to the nearest differential level.
/// Exact midpoints round toward +.
double quantize_weight(double w, const DeviceGrid &grid, int fan_in);

/// Grid level index realizing `w`, or -1 when `w` is off grid.
int level_of_weight(double w, const DeviceGrid &grid, int fan_in, double rel_tol = 1e-9);

/// Builds complementary pairs realizing `weights` (inputs x cols) and the
/// bias-row weights offsets/bias_voltage. Every value must be on the grid.
CrossbarLayer instantiate_conductances(const Matrix &weights, std::span<const double> offsets,
                                       const DeviceGrid &grid, double bias_voltage);

struct PerturbationSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/// R <- R * exp(theta), theta ~ N(0, sigma^2), i.i.d. per device.
CrossbarLayer perturb_resistances(const CrossbarLayer &layer, const PerturbationSpec &spec);

/// Sum of |W| per column of a weight matrix (rows x cols).
std::vector<double> column_abs_sums(const Matrix &weights);

} // namespace nnadc
