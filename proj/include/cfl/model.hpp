#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cfl/matrix.hpp"
#include "cfl/rng.hpp"

namespace cfl {

enum class Activation { linear, leaky_relu };

inline constexpr double kLeakySlope = 0.01;

/// y = act(x W + b), W stored input x output.
struct DenseLayer {
  Matrix weight;
  std::vector<double> bias;
  Activation activation = Activation::linear;

  std::size_t inputs() const { return weight.rows(); }
  std::size_t outputs() const { return weight.cols(); }
  bool operator==(const DenseLayer&) const = default;
};

struct ModelShape {
  std::size_t input = 0;
  std::size_t hidden = 256;
  std::size_t embed = 256;
  bool operator==(const ModelShape&) const = default;
};

/// Encoder input -> hidden -> embed and mirrored decoder embed -> hidden ->
/// input. Hidden layers use leaky ReLU, the last layer of each stack is linear.
/// Gradients share this type.
struct MlpParams {
  ModelShape shape;
  std::vector<DenseLayer> encoder;
  std::vector<DenseLayer> decoder;

  std::size_t parameter_count() const;
  bool operator==(const MlpParams&) const = default;
};

/// The frozen encoder kept after pretraining; the decoder is not part of it.
struct Encoder {
  ModelShape shape;
  std::vector<DenseLayer> layers;

  Matrix encode(const Matrix& x) const;
};

// Glorot-uniform weights, zero biases.
MlpParams init_params(const ModelShape& shape, RngStream& rng);
// Same layout, all zeros; the starting point for gradient accumulation.
MlpParams zeros_like(const MlpParams& p);

Matrix encode(const MlpParams& p, const Matrix& x);
Matrix decode(const MlpParams& p, const Matrix& e);
Encoder encoder_of(const MlpParams& p);

struct StackTrace {
  std::vector<Matrix> inputs;  // input to each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
  Matrix output;
};

struct ViewTrace {
  StackTrace encoder;
  StackTrace decoder;
  const Matrix& embedding() const { return encoder.output; }
  const Matrix& reconstruction() const { return decoder.output; }
};

struct ForwardTrace {
  std::array<ViewTrace, 2> views;
  std::uint64_t params_fingerprint = 0;
};

// Loss gradients with respect to the network outputs of both views.
struct OutputGrads {
  std::array<Matrix, 2> embedding;
  std::array<Matrix, 2> reconstruction;
};

std::uint64_t fingerprint(const MlpParams& p);

ForwardTrace forward(const MlpParams& p, const Matrix& view1, const Matrix& view2);

/// Exact parameter gradients through decoder and encoder of both views.
/// Throws Error if `trace` was produced by different parameters.
MlpParams backward(const MlpParams& p, const ForwardTrace& trace, const OutputGrads& grads);

enum class OptimizerKind { adam, sgd };

struct OptState {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
};

OptState make_opt_state(const MlpParams& p, OptimizerKind kind, double learning_rate);

// Throws DivergenceError on a non-finite gradient; params are left untouched.
void opt_step(MlpParams& params, const MlpParams& grads, OptState& opt);

// Encoder layers then decoder layers; per layer the weight (row-major) then
// the bias.
std::vector<double> flatten(const MlpParams& p);
MlpParams unflatten(std::span<const double> flat, const ModelShape& shape);

void save_checkpoint(const std::filesystem::path& path, const MlpParams& p);
MlpParams load_checkpoint(const std::filesystem::path& path);

}  // namespace cfl
