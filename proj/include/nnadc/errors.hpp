#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nnadc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input outside the domain of a conversion function.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A caller broke an operation's precondition (for example a residue
/// requested for a level that is not the input's quantization level).
class ContractError : public Error {
public:
  using Error::Error;
};

/// Non-physical device parameter (zero or negative conductance).
class DeviceError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// Weight that cannot be realized on the device grid.
class PrecisionError : public Error {
public:
  using Error::Error;
};

class CoherenceError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

/// A model or pipeline file that is missing, malformed, or does not match
/// the configuration it claims to come from.
class ModelReferenceError : public Error {
public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class TrainingError : public Error {
public:
  TrainingError(const std::string &what, std::uint64_t seed, long iteration)
      : Error(what + " (seed " + std::to_string(seed) + ", iteration " +
              std::to_string(iteration) + ")"),
        seed_(seed), iteration_(iteration) {}

  std::uint64_t seed() const noexcept { return seed_; }
  long iteration() const noexcept { return iteration_; }

private:
  std::uint64_t seed_;
  long iteration_;
};

} // namespace nnadc
