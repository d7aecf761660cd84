#include "nnadc/signal.hpp"

#include "nnadc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace nnadc {

std::string to_string(EncodingKind kind) {
  return kind == EncodingKind::linear ? "linear" : "logarithmic";
}

EncodingKind encoding_kind_from_string(const std::string &name) {
  if (name == "linear")
    return EncodingKind::linear;
  if (name == "logarithmic" || name == "log")
    return EncodingKind::logarithmic;
  throw ConfigError("unknown encoding kind '" + name + "'");
}

void EncodingScheme::validate() const {
  if (!(v_min < v_max))
    throw ConfigError("encoding range requires v_min < v_max");
}

double EncodingScheme::normalized_amplitude(double v) const {
  if (v < v_min || v > v_max)
    throw DomainError("input " + std::to_string(v) + " outside encoding range");
  return (v - v_min) / (v_max - v_min);
}

double EncodingScheme::normalize(double v) const {
  const double a = normalized_amplitude(v);
  return kind == EncodingKind::linear ? a : std::log2(a + 1.0);
}

std::vector<Bits> default_code_table(int resolution_bits) {
  switch (resolution_bits) {
  case 1:
    return {{0, 0}, {1, 1}};
  case 2:
    return {{0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {1, 1, 1}};
  case 3:
    return {{0, 0, 0, 0}, {0, 0, 0, 1}, {0, 0, 1, 1}, {0, 1, 1, 1},
            {1, 1, 1, 1}, {1, 1, 1, 0}, {1, 1, 0, 0}, {1, 0, 0, 0}};
  default:
    throw ConfigError("stage resolution must be 1, 2 or 3 bits");
  }
}

StageSpec default_stage_spec(int resolution_bits, double vdd) {
  StageSpec spec;
  spec.resolution_bits = resolution_bits;
  spec.vdd = vdd;
  spec.code_table = default_code_table(resolution_bits);
  spec.smooth_width = static_cast<int>(spec.code_table.front().size());
  switch (resolution_bits) {
  case 1:
    spec.subadc_hidden = 3;
    spec.residue_hidden = 5;
    break;
  case 2:
    spec.subadc_hidden = 4;
    spec.residue_hidden = 7;
    break;
  default:
    spec.subadc_hidden = 6;
    spec.residue_hidden = 9;
    break;
  }
  return spec;
}

void StageSpec::validate() const {
  if (resolution_bits < 1 || resolution_bits > 3)
    throw ConfigError("stage resolution must be 1, 2 or 3 bits");
  if (smooth_width <= resolution_bits)
    throw ConfigError("smooth width must exceed the stage resolution");
  if (subadc_hidden < 1 || residue_hidden < 1)
    throw ConfigError("hidden layer sizes must be >= 1");
  if (!(vdd > 0.0))
    throw ConfigError("vdd must be positive");
  if (!(residue_gain > 0.0))
    throw ConfigError("residue gain must be positive");
  if (static_cast<int>(code_table.size()) != levels())
    throw ConfigError("code table needs one codeword per level");
  for (std::size_t i = 0; i < code_table.size(); ++i) {
    if (static_cast<int>(code_table[i].size()) != smooth_width)
      throw ConfigError("codeword width differs from smooth width");
    for (auto b : code_table[i])
      if (b > 1)
        throw ConfigError("codewords must be binary");
    for (std::size_t j = 0; j < i; ++j)
      if (code_table[j] == code_table[i])
        throw ConfigError("duplicate codeword in code table");
  }
}

DigitalCode::DigitalCode(std::uint32_t value, int width) : value_(value), width_(width) {
  if (width < 1 || width > 31)
    throw ConfigError("code width must be in 1..31");
  if (value >= (1u << width))
    throw DomainError("code value does not fit its width");
}

DigitalCode DigitalCode::from_bits(std::span<const std::uint8_t> bits) {
  std::uint32_t value = 0;
  for (auto b : bits)
    value = (value << 1) | (b ? 1u : 0u);
  return DigitalCode(value, static_cast<int>(bits.size()));
}

int DigitalCode::bit(int i) const {
  if (i < 0 || i >= width_)
    throw DomainError("bit index out of range");
  return static_cast<int>((value_ >> (width_ - 1 - i)) & 1u);
}

Bits DigitalCode::bits() const {
  Bits out(static_cast<std::size_t>(width_));
  for (int i = 0; i < width_; ++i)
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(bit(i));
  return out;
}

std::string DigitalCode::to_string() const {
  std::string s;
  for (int i = 0; i < width_; ++i)
    s.push_back(bit(i) ? '1' : '0');
  return s;
}

int ideal_stage_level(double v, const StageSpec &spec) {
  if (!(v >= 0.0 && v <= spec.vdd))
    throw DomainError("stage input " + std::to_string(v) + " outside [0, vdd]");
  const int levels = spec.levels();
  const auto level = static_cast<int>(std::floor(v * levels / spec.vdd));
  return std::min(level, levels - 1);
}

double residue_for_level(double v, int level, int resolution_bits, double vdd) {
  const double scale = static_cast<double>(1 << resolution_bits);
  return (v - level * vdd / scale) * scale;
}

double ideal_residue(double v, int level, const StageSpec &spec) {
  if (ideal_stage_level(v, spec) != level)
    throw ContractError("level " + std::to_string(level) +
                        " is not the stage decision for input " + std::to_string(v));
  return residue_for_level(v, level, spec.resolution_bits, spec.vdd);
}

DigitalCode ideal_adc(double v, int bits, const EncodingScheme &enc) {
  if (bits < 1 || bits > 31)
    throw ConfigError("ADC resolution must be in 1..31 bits");
  enc.validate();
  const double t = enc.normalize(v);
  const double full = std::ldexp(1.0, bits);
  const auto value = static_cast<std::uint32_t>(std::min(std::floor(t * full), full - 1.0));
  return DigitalCode(value, bits);
}

Bits smooth_encode(int level, const StageSpec &spec) {
  if (level < 0 || level >= spec.levels())
    throw DomainError("level " + std::to_string(level) + " out of range");
  return spec.code_table.at(static_cast<std::size_t>(level));
}

int smooth_decode(std::span<const std::uint8_t> bits, const StageSpec &spec) {
  if (static_cast<int>(bits.size()) != spec.smooth_width)
    throw ShapeError("smooth code width mismatch");
  int best_level = 0;
  int best_distance = spec.smooth_width + 1;
  for (int level = 0; level < spec.levels(); ++level) {
    const auto &word = spec.code_table[static_cast<std::size_t>(level)];
    int distance = 0;
    for (std::size_t i = 0; i < word.size(); ++i)
      distance += (word[i] != 0) != (bits[i] != 0);
    if (distance < best_distance) {
      best_distance = distance;
      best_level = level;
    }
  }
  return best_level;
}

LogStageOutput log_stage_oracle(double v_norm) { return log_stage_oracle(v_norm, 1); }

LogStageOutput log_stage_oracle(double v_norm, int resolution_bits) {
  if (!(v_norm >= 0.0 && v_norm <= 1.0))
    throw DomainError("normalized input outside [0, 1]");
  if (resolution_bits < 1 || resolution_bits > 3)
    throw ConfigError("stage resolution must be 1, 2 or 3 bits");
  // (1+v)^(2^N) grows by repeated squaring; compare against powers of two
  // instead of taking a logarithm so thresholds stay exact.
  double power = 1.0 + v_norm;
  for (int i = 0; i < resolution_bits; ++i)
    power *= power;
  const int levels = 1 << resolution_bits;
  int level = 0;
  while (level + 1 < levels && power >= std::ldexp(1.0, level + 1))
    ++level;
  return {level, power / std::ldexp(1.0, level) - 1.0};
}

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

SineStimulus sample_sine(double amplitude, double f_in, double f_s, std::size_t n,
                         double offset, double vdd) {
  if (!is_power_of_two(n))
    throw DomainError("stimulus length must be a power of two");
  if (!(f_s > 0.0))
    throw DomainError("sampling rate must be positive");
  SineStimulus out;
  out.raw.resize(n);
  out.samples.resize(n);
  out.cycles = f_in * static_cast<double>(n) / f_s;
  const double rounded = std::round(out.cycles);
  if (std::abs(out.cycles - rounded) < 1e-9 * std::max(1.0, rounded) && rounded > 0) {
    const auto j = static_cast<long long>(rounded);
    out.coherent = (j % 2 == 1) && std::gcd(j, static_cast<long long>(n)) == 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double phase =
        2.0 * std::numbers::pi * std::fmod(f_in * static_cast<double>(k) / f_s, 1.0);
    const double v = offset + amplitude * std::sin(phase);
    out.raw[k] = v;
    out.samples[k] = vdd > 0.0 ? std::clamp(v, 0.0, vdd) : v;
  }
  return out;
}

} // namespace nnadc
