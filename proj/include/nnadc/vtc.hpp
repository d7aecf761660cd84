#pragma once

// Behavioral inverter transfer curve used as the hidden-layer activation,
// and Monte Carlo families of curves standing in for PVT variation.

#include <cstdint>
#include <random>
#include <vector>

namespace nnadc {

struct VtcParams {
  double v_m = 0.5;     // switching midpoint
  double s = 1.0 / 30;  // transition width scale
  double v_high = 1.0;
  double v_low = 0.0;

  void validate() const;
  friend bool operator==(const VtcParams &, const VtcParams &) = default;
};

/// v_low + (v_high - v_low) * logistic((v_m - v) / s).
double vtc_eval(const VtcParams &p, double v) noexcept;
double vtc_derivative(const VtcParams &p, double v) noexcept;

/// Default switching point as a fraction of vdd. Placed low so that a
/// column whose weights are bounded by the crossbar normalization can still
/// sweep its output across the transition.
inline constexpr double default_vtc_midpoint_fraction = 0.1;

/// Nominal inverter for a supply: rails (0, vdd), width vdd/30, midpoint at
/// `midpoint_fraction` * vdd.
VtcParams nominal_vtc(double vdd, double midpoint_fraction = default_vtc_midpoint_fraction);

struct VtcVariation {
  VtcParams nominal;
  double sigma_vm = 0.0;     // volts
  double sigma_s_rel = 0.0;  // fraction of nominal s

  void validate() const;
};

/// Default family spread: 2% of vdd on the midpoint, 10% on the width.
VtcVariation default_vtc_variation(double vdd,
                                   double midpoint_fraction = default_vtc_midpoint_fraction);

struct VtcFamily {
  std::vector<VtcParams> members;
  std::uint64_t seed = 0;
  VtcVariation variation;

  std::size_t size() const noexcept { return members.size(); }
  const VtcParams &operator[](std::size_t i) const { return members.at(i); }
};

/// n members with v_m ~ N(nominal, sigma_vm^2) and s ~ N(nominal,
/// (sigma_s_rel * s)^2) redrawn until positive.
VtcFamily sample_family(std::size_t n, const VtcVariation &variation, std::uint64_t seed);

/// Uniform member index.
std::size_t pick_random_index(const VtcFamily &family, std::mt19937_64 &rng);
const VtcParams &pick_random(const VtcFamily &family, std::mt19937_64 &rng);

} // namespace nnadc
