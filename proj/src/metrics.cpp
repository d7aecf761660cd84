#include "nnadc/metrics.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace nnadc {

void fft_inplace(std::vector<std::complex<double>> &x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n))
    throw ShapeError("FFT length " + std::to_string(n) + " is not a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1)
      j ^= bit;
    j ^= bit;
    if (i < j)
      std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    // Twiddles computed directly rather than by recurrence to keep the
    // rounding error flat for long transforms.
    std::vector<std::complex<double>> tw(half);
    for (std::size_t k = 0; k < half; ++k)
      tw[k] = std::polar(1.0, ang * static_cast<double>(k));
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const auto u = x[i + k];
        const auto v = x[i + k + half] * tw[k];
        x[i + k] = u + v;
        x[i + k + half] = u - v;
      }
    }
  }
}

std::vector<double> SpectrumResult::one_sided() const {
  std::vector<double> out(n / 2 + 1, 0.0);
  out[0] = power[0];
  for (std::size_t k = 1; k < n / 2; ++k)
    out[k] = power[k] + power[n - k];
  if (n >= 2)
    out[n / 2] = power[n / 2];
  return out;
}

SpectrumResult spectrum(std::span<const double> samples, double f_s) {
  const std::size_t n = samples.size();
  if (!is_power_of_two(n))
    throw ShapeError("spectrum length " + std::to_string(n) + " is not a power of two");
  std::vector<std::complex<double>> x(samples.begin(), samples.end());
  fft_inplace(x);
  SpectrumResult r;
  r.n = n;
  r.f_s = f_s;
  r.power.resize(n);
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    r.power[k] = std::norm(x[k]) * scale;
  double best = -1.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    if (r.power[k] > best) {
      best = r.power[k];
      r.signal_bin = k;
    }
  }
  return r;
}

double enob_from_sndr(double sndr_db) noexcept { return (sndr_db - 1.76) / 6.02; }

SndrResult sndr_enob(std::span<const double> samples, double f_s, double f_in) {
  const std::size_t n = samples.size();
  const double cycles = f_in * static_cast<double>(n) / f_s;
  const double bin = std::round(cycles);
  if (std::abs(cycles - bin) > 1e-9 * std::max(1.0, bin) || bin < 1 ||
      bin >= static_cast<double>(n) / 2)
    throw CoherenceError("tone at " + std::to_string(cycles) +
                         " cycles does not fall on a spectral bin");
  const auto spec = spectrum(samples, f_s);
  const auto j = static_cast<std::size_t>(bin);
  const double signal = spec.power[j] + spec.power[n - j];
  double noise = 0.0;
  for (std::size_t k = 1; k < n; ++k)
    if (k != j && k != n - j)
      noise += spec.power[k];
  SndrResult r;
  r.signal_bin = j;
  if (!(signal > 0.0))
    r.sndr_db = -400.0; // no tone at all, e.g. a stuck output
  else if (noise <= 0.0)
    r.sndr_db = 400.0; // below double precision; report a sentinel ceiling
  else
    r.sndr_db = 10.0 * std::log10(signal / noise);
  r.enob = enob_from_sndr(r.sndr_db);
  return r;
}

std::vector<double> residue_grid(double vdd) {
  std::vector<double> g(residue_grid_points);
  for (std::size_t k = 0; k < g.size(); ++k)
    g[k] = vdd * static_cast<double>(k) / static_cast<double>(residue_grid_points);
  return g;
}

double residue_mse(const std::function<double(double)> &predicted,
                   const std::function<double(double)> &ideal, double vdd) {
  double acc = 0.0;
  for (double v : residue_grid(vdd)) {
    const double d = predicted(v) - ideal(v);
    acc += d * d;
  }
  return acc / static_cast<double>(residue_grid_points);
}

std::vector<double> converter_output(const std::function<double(double)> &convert,
                                     const SineTest &test) {
  const double half = 0.5 * test.vdd;
  const auto stim = sample_sine(half * test.amplitude_fraction, test.f_in(), test.f_s, test.n,
                                half, test.vdd);
  if (!stim.coherent)
    throw CoherenceError("sine test is not coherent: J=" + std::to_string(test.cycles) +
                         ", n=" + std::to_string(test.n));
  std::vector<double> out(test.n);
  for (std::size_t k = 0; k < test.n; ++k)
    out[k] = convert(stim.samples[k]);
  return out;
}

SndrResult converter_enob(const std::function<double(double)> &convert, const SineTest &test) {
  return sndr_enob(converter_output(convert, test), test.f_s, test.f_in());
}

double ideal_quantizer_enob(int bits, const SineTest &test) {
  const EncodingScheme enc{EncodingKind::linear, 0.0, test.vdd};
  const double full = std::ldexp(1.0, bits);
  return converter_enob(
             [&](double v) {
               return (ideal_adc(v, bits, enc).value() + 0.5) / full * test.vdd;
             },
             test)
      .enob;
}

double mse_to_enob_sensitivity(int pipeline_reso, double injected_mse, std::uint64_t seed,
                               const SineTest &test) {
  if (pipeline_reso < 1 || pipeline_reso > 24)
    throw ConfigError("pipeline resolution must be 1..24");
  if (injected_mse < 0.0)
    throw ConfigError("injected MSE must be non-negative");
  const double vdd = test.vdd;
  const double sigma = std::sqrt(injected_mse) * vdd;
  // Unit normals drawn once so every MSE level scales the same realization.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<double> z(test.n);
  for (auto &x : z)
    x = unit(rng);
  std::size_t k = 0;
  const double full = std::ldexp(1.0, pipeline_reso);
  return converter_enob(
             [&](double v) {
               std::uint32_t code = 0;
               double r = v;
               for (int i = 0; i < pipeline_reso; ++i) {
                 const int b = r >= 0.5 * vdd ? 1 : 0;
                 code = (code << 1) | static_cast<std::uint32_t>(b);
                 r = 2.0 * r - b * vdd;
                 if (i == 0)
                   r += sigma * z[k++ % z.size()];
                 r = std::clamp(r, 0.0, vdd);
               }
               return (code + 0.5) / full * vdd;
             },
             test)
      .enob;
}

} // namespace nnadc
