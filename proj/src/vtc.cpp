#include "nnadc/vtc.hpp"

#include "nnadc/errors.hpp"

#include <cmath>

namespace nnadc {

void VtcParams::validate() const {
  if (!(s > 0.0))
    throw ConfigError("VTC width must be positive");
  if (!(v_low < v_high))
    throw ConfigError("VTC requires v_low < v_high");
}

namespace {

// Logistic that never evaluates exp of a large positive argument.
double logistic(double x) noexcept {
  if (x >= 0.0)
    return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

} // namespace

double vtc_eval(const VtcParams &p, double v) noexcept {
  return p.v_low + (p.v_high - p.v_low) * logistic((p.v_m - v) / p.s);
}

double vtc_derivative(const VtcParams &p, double v) noexcept {
  const double l = logistic((p.v_m - v) / p.s);
  return -(p.v_high - p.v_low) * l * (1.0 - l) / p.s;
}

VtcParams nominal_vtc(double vdd, double midpoint_fraction) {
  VtcParams p{midpoint_fraction * vdd, vdd / 30.0, vdd, 0.0};
  p.validate();
  return p;
}

void VtcVariation::validate() const {
  nominal.validate();
  if (sigma_vm < 0.0 || sigma_s_rel < 0.0)
    throw ConfigError("VTC variation must be non-negative");
}

VtcVariation default_vtc_variation(double vdd, double midpoint_fraction) {
  return {nominal_vtc(vdd, midpoint_fraction), 0.02 * vdd, 0.10};
}

VtcFamily sample_family(std::size_t n, const VtcVariation &variation, std::uint64_t seed) {
  if (n < 1)
    throw ConfigError("VTC family needs at least one member");
  variation.validate();
  VtcFamily family;
  family.seed = seed;
  family.variation = variation;
  family.members.reserve(n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto &nom = variation.nominal;
  for (std::size_t i = 0; i < n; ++i) {
    VtcParams p = nom;
    p.v_m = nom.v_m + variation.sigma_vm * unit(rng);
    do {
      p.s = nom.s * (1.0 + variation.sigma_s_rel * unit(rng));
    } while (!(p.s > 0.0));
    family.members.push_back(p);
  }
  return family;
}

std::size_t pick_random_index(const VtcFamily &family, std::mt19937_64 &rng) {
  if (family.members.empty())
    throw ConfigError("cannot draw from an empty VTC family");
  std::uniform_int_distribution<std::size_t> dist(0, family.members.size() - 1);
  return dist(rng);
}

const VtcParams &pick_random(const VtcFamily &family, std::mt19937_64 &rng) {
  return family.members[pick_random_index(family, rng)];
}

} // namespace nnadc
