#pragma once

// Ideal conversion oracles: stage quantizer, residue, end-to-end ADC,
// smooth codes, the logarithmic stage, and the coherent sine stimulus.
// Everything here is a pure function and serves as ground truth for the
// trainer, the pipeline simulator and the tests.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace nnadc {

using Bits = std::vector<std::uint8_t>;

enum class EncodingKind { linear, logarithmic };

std::string to_string(EncodingKind kind);
EncodingKind encoding_kind_from_string(const std::string &name);

/// Maps an input voltage range onto the unit interval. The logarithmic
/// kind first normalizes to a in [0,1], then applies t = log2(a + 1).
struct EncodingScheme {
  EncodingKind kind = EncodingKind::linear;
  double v_min = 0.0;
  double v_max = 1.0;

  void validate() const;
  /// a = (v - v_min) / (v_max - v_min), no log transform.
  double normalized_amplitude(double v) const;
  /// t in [0,1] for either kind.
  double normalize(double v) const;
};

/// Per-stage hardware description: resolution, smooth-code width,
/// hidden-layer sizes of the two stage networks, and the supply.
struct StageSpec {
  int resolution_bits = 1;   // N_i
  int smooth_width = 2;      // S_i
  int subadc_hidden = 3;     // H_F
  int residue_hidden = 5;    // H_R
  double vdd = 1.0;
  /// Fixed voltage gain of the output driver (sample-and-hold buffer) that
  /// follows the residue crossbar. A passive crossbar column can only swing
  /// a fraction of the rail, so the buffer restores full scale.
  double residue_gain = 10.0;
  /// Codeword per level, MSB first. Filled by default_stage_spec().
  std::vector<Bits> code_table;

  int levels() const noexcept { return 1 << resolution_bits; }
  double lsb() const noexcept { return vdd / levels(); }
  void validate() const;
};

/// Thermometer table for N=2, duplicated thermometer bit for N=1, and the
/// 4-bit twisted-ring (Johnson) code for N=3.
std::vector<Bits> default_code_table(int resolution_bits);

/// Default stage: (N=1,S=2,3,5), (N=2,S=3,4,7), (N=3,S=4,6,9).
StageSpec default_stage_spec(int resolution_bits, double vdd = 1.0);

class DigitalCode {
public:
  DigitalCode() = default;
  DigitalCode(std::uint32_t value, int width);
  static DigitalCode from_bits(std::span<const std::uint8_t> bits);

  std::uint32_t value() const noexcept { return value_; }
  int width() const noexcept { return width_; }
  /// Bit i counted from the MSB (i = 0 is the MSB).
  int bit(int i) const;
  Bits bits() const;
  std::string to_string() const;

  friend bool operator==(const DigitalCode &, const DigitalCode &) = default;

private:
  std::uint32_t value_ = 0;
  int width_ = 0;
};

/// Floor-convention stage decision, clamped to 2^N - 1 at the upper rail.
int ideal_stage_level(double v, const StageSpec &spec);

/// (v - level*vdd/2^N) * 2^N. The level must be the input's own stage level.
double ideal_residue(double v, int level, const StageSpec &spec);

/// The same residue arithmetic for an arbitrary digital decision, without
/// the consistency check. Used for training targets that follow the code a
/// real sub-ADC actually produced.
double residue_for_level(double v, int level, int resolution_bits, double vdd);

/// M-bit quantizer over the encoding range.
DigitalCode ideal_adc(double v, int bits, const EncodingScheme &enc);

Bits smooth_encode(int level, const StageSpec &spec);
/// Nearest codeword by Hamming distance; ties go to the lowest level.
int smooth_decode(std::span<const std::uint8_t> bits, const StageSpec &spec);

struct LogStageOutput {
  int bit = 0;
  double residue = 0.0;
};

/// One-bit logarithmic stage on a normalized input: extracts the next bit
/// of log2(1 + v) and returns the normalized input for the next stage.
LogStageOutput log_stage_oracle(double v_norm);

/// N-bit generalization used by the pipeline: level = floor(2^N log2(1+v)),
/// residue = (1+v)^(2^N) / 2^level - 1.
LogStageOutput log_stage_oracle(double v_norm, int resolution_bits);

struct SineStimulus {
  std::vector<double> raw;      // before rail clipping
  std::vector<double> samples;  // clipped to [0, vdd]
  double cycles = 0.0;          // J = f_in * n / f_s
  bool coherent = false;        // J integral, odd and coprime to n
};

/// offset + amplitude * sin(2 pi f_in k / f_s), k = 0..n-1.
/// vdd <= 0 disables clipping.
SineStimulus sample_sine(double amplitude, double f_in, double f_s, std::size_t n,
                         double offset, double vdd);

bool is_power_of_two(std::size_t n) noexcept;

} // namespace nnadc
