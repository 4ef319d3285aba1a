#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bcareid/rng.hpp"

namespace bcareid {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct DenseLayer {
  Matrix weight;  // [out x in]
  Vector bias;    // [out]

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
  bool operator==(const DenseLayer&) const = default;
};

// Weights of the dense feature mapping. Hidden layers use a leaky rectifier
// with a fixed negative slope; the last layer is linear.
struct EncoderParams {
  std::vector<DenseLayer> layers;
  double leaky_slope = 0.01;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t parameter_count() const;
  bool operator==(const EncoderParams&) const = default;

  // Throws ConfigError on inconsistent layer shapes, DataError on non-finite entries.
  void validate() const;

  // Gradient containers share the parameter layout.
  EncoderParams zeros_like() const;
  bool all_zero() const;
  bool all_finite() const;
};

struct EncoderShape {
  int input_dim = 32;
  std::vector<int> hidden = {64, 64};
  int output_dim = 64;
  double leaky_slope = 0.01;
};

// He-style normal init (std = sqrt(2 / fan_in)), zero biases.
EncoderParams init_encoder(const EncoderShape& shape, Rng& rng);

// Activation record of a forward pass: the input and every layer's
// pre-activation, which is all reverse accumulation needs.
struct Tape {
  Matrix input;
  std::vector<Matrix> pre_activations;
  const EncoderParams* params = nullptr;
};

struct Encoded {
  Matrix embeddings;
  Tape tape;
};

Encoded encode(const EncoderParams& params, const Matrix& inputs);

// Forward pass without recording a tape.
Matrix encode_only(const EncoderParams& params, const Matrix& inputs);

// Gradients of sum_ij grad[i,j] * embedding[i,j] with respect to every parameter.
EncoderParams backprop(const Tape& tape, const Matrix& embedding_grads);

struct PreluResult {
  Vector value;
  Vector derivative;
};

// x if x > 0 else slope * x; the derivative at exactly zero is the slope.
PreluResult prelu(const Vector& x, double slope);

struct AdamState {
  EncoderParams first_moment;
  EncoderParams second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const EncoderParams& params);
  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam update in place. Throws TrainingError on non-finite
// gradients and ConfigError on shape mismatch or negative rate.
void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state,
               double rate);

// Adam over a flat parameter vector, for small models that do not fit the
// layered encoder layout.
class FlatAdam {
 public:
  explicit FlatAdam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grads, double rate);
  std::uint64_t steps() const { return step_; }

 private:
  std::vector<double> m_, v_;
  std::uint64_t step_ = 0;
  double beta1_, beta2_, epsilon_;
};

struct Schedule {
  double base_rate = 3e-4;
  int total_epochs = 60;
};

// Linear decay to zero: base * (1 - epoch / total).
double schedule_rate(const Schedule& schedule, int epoch);

// Applies fn to every scalar parameter in layout order (layer, weights
// row-major, then bias).
void for_each_param(EncoderParams& p, const std::function<void(double&)>& fn);
std::vector<double> flatten(const EncoderParams& p);
void unflatten(EncoderParams& p, std::span<const double> values);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Compares analytic gradients against central differences of `loss` around
// `point`. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult finite_difference_check(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> point, std::span<const double> analytic, double h = 1e-5,
    double floor = 1e-6);

}  // namespace bcareid
