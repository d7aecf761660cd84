#pragma once

// Spectral accuracy (FFT, SNDR, ENOB) and functional accuracy (residue MSE).

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nnadc {

/// In-place iterative radix-2 DIT transform. Length must be a power of two.
void fft_inplace(std::vector<std::complex<double>> &x);

struct SpectrumResult {
  /// Two-sided bin power |X_k|^2 / n^2, k = 0..n-1. Sums to the mean
  /// square of the sequence.
  std::vector<double> power;
  std::size_t signal_bin = 0; // largest non-DC bin in the first half
  double f_s = 1.0;
  std::size_t n = 0;

  double bin_frequency(std::size_t k) const { return f_s * static_cast<double>(k) / n; }
  /// Single-sided power for bins 0..n/2 (folded).
  std::vector<double> one_sided() const;
};

SpectrumResult spectrum(std::span<const double> samples, double f_s);

struct SndrResult {
  double sndr_db = 0.0;
  double enob = 0.0;
  std::size_t signal_bin = 0;
};

double enob_from_sndr(double sndr_db) noexcept;

/// Signal is the tone's bin and its mirror; noise is every other non-DC bin.
/// Throws CoherenceError when f_in does not fall on a bin.
SndrResult sndr_enob(std::span<const double> samples, double f_s, double f_in);

inline constexpr std::size_t residue_grid_points = 2048;

/// k * vdd / 2048 for k = 0..2047.
std::vector<double> residue_grid(double vdd);

/// Mean squared difference over the 2048-point grid.
double residue_mse(const std::function<double(double)> &predicted,
                   const std::function<double(double)> &ideal, double vdd);

struct SineTest {
  std::size_t n = 4096;
  std::size_t cycles = 127;  // J
  double f_s = 1.0;
  double vdd = 1.0;
  /// Amplitude relative to half the full scale; 1 spans the full range.
  double amplitude_fraction = 1.0;

  double f_in() const noexcept { return f_s * static_cast<double>(cycles) / n; }
};

/// Converter outputs for the coherent sine over [0, vdd].
std::vector<double> converter_output(const std::function<double(double)> &convert,
                                     const SineTest &test);

/// ENOB of a converter given as a function from input to reconstructed
/// output, driven by a coherent sine over [0, vdd].
SndrResult converter_enob(const std::function<double(double)> &convert, const SineTest &test);

/// ENOB of an ideal M-bit mid-level-reconstructing quantizer.
double ideal_quantizer_enob(int bits, const SineTest &test = {});

/// ENOB of an ideal linear pipeline of 1-bit stages whose first residue is
/// corrupted by zero-mean Gaussian error with the given mean square (vdd^2).
double mse_to_enob_sensitivity(int pipeline_reso, double injected_mse, std::uint64_t seed = 1,
                               const SineTest &test = {});

} // namespace nnadc
