#pragma once

// The three-layer stage network (input, inverter hidden layer, output) and
// its forward/backward passes. Weights are dimensionless crossbar weights;
// biases are voltages realized by a bias row driven at vdd.

#include "nnadc/crossbar.hpp"
#include "nnadc/matrix.hpp"
#include "nnadc/vtc.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace nnadc {

struct MlpParams {
  Matrix w1;                                // hidden x inputs
  std::vector<double> v1;                   // hidden, volts
  Matrix w2;                                // outputs x hidden
  std::vector<double> v2;                   // outputs, volts
  std::vector<std::size_t> vtc_assignment;  // family member per hidden neuron

  MlpParams() = default;
  MlpParams(std::size_t inputs, std::size_t hidden, std::size_t outputs);

  std::size_t inputs() const noexcept { return w1.cols(); }
  std::size_t hidden() const noexcept { return w1.rows(); }
  std::size_t outputs() const noexcept { return w2.rows(); }
  std::size_t parameter_count() const noexcept {
    return w1.size() + v1.size() + w2.size() + v2.size();
  }

  /// Parameter blocks in a fixed order: w1, v1, w2, v2.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
};

enum class HeadKind { subadc, residue };
enum class Mode { train, infer };

/// Output stage of a network. The sub-ADC head drives comparators at vdd/2
/// (a steep logistic of the given width while training); the residue head is
/// the crossbar output times the buffer gain, saturating at the rails in
/// inference.
struct Head {
  HeadKind kind = HeadKind::residue;
  double vdd = 1.0;
  double gain = 1.0;
  double surrogate_width = 0.01;
};

/// One sample. `assignment` overrides params.vtc_assignment when non-empty.
std::vector<double> forward_stage(const MlpParams &params, std::span<const double> inputs,
                                  const VtcFamily &family, const Head &head, Mode mode,
                                  std::span<const std::size_t> assignment = {});

/// Mean over the batch of the per-sample squared error summed over outputs.
double loss(const Matrix &outputs, const Matrix &targets);

struct Gradients {
  Matrix w1;
  std::vector<double> v1;
  Matrix w2;
  std::vector<double> v2;

  explicit Gradients(const MlpParams &shape);
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
};

struct Batch {
  Matrix inputs;   // batch x inputs
  Matrix targets;  // batch x outputs
};

/// Train-mode forward over a batch followed by the analytic backward pass.
/// Returns the loss; gradients are written to `grads`.
double backprop(const MlpParams &params, const Batch &batch, const VtcFamily &family,
                const Head &head, std::span<const std::size_t> assignment, Gradients &grads);

/// Batch forward in either mode, rows = samples.
Matrix forward_batch(const MlpParams &params, const Matrix &inputs, const VtcFamily &family,
                     const Head &head, Mode mode, std::span<const std::size_t> assignment = {});

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Gradients m;
  Gradients v;
  long step = 0;

  explicit AdamState(const MlpParams &shape) : m(shape), v(shape) {}
};

void adam_step(MlpParams &params, const Gradients &grads, AdamState &state, double lr,
               const AdamConfig &config);

/// Clip and quantize every weight and bias onto the device grid: layer 1 has
/// fan-in inputs+1, layer 2 hidden+1. Biases are quantized as bias-row
/// weights times vdd.
MlpParams project(const MlpParams &params, const DeviceGrid &grid, double vdd);

/// True when every parameter already sits on its grid.
bool is_projected(const MlpParams &params, const DeviceGrid &grid, double vdd);

struct CrossbarNetwork {
  CrossbarLayer layer1;  // (inputs + 1) x hidden
  CrossbarLayer layer2;  // (hidden + 1) x outputs
  std::vector<std::size_t> vtc_assignment;
};

/// Requires projected params.
CrossbarNetwork to_crossbar(const MlpParams &params, const DeviceGrid &grid, double vdd);

/// Effective network of (possibly perturbed) conductances.
MlpParams from_crossbar(const CrossbarNetwork &network);

} // namespace nnadc
