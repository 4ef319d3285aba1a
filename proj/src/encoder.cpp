#include <cmath>
#include <string>

#include "bcareid/errors.hpp"
#include "bcareid/numerics.hpp"

namespace bcareid {

Eigen::Index EncoderParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim();
}

Eigen::Index EncoderParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim();
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void EncoderParams::validate() const {
  if (layers.empty()) throw ConfigError("encoder has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.out_dim())
      throw ConfigError("layer " + std::to_string(i) + ": bias length differs from output dim");
    if (i + 1 < layers.size() && layers[i + 1].in_dim() != l.out_dim())
      throw ConfigError("layer " + std::to_string(i + 1) + ": input dim " +
                        std::to_string(layers[i + 1].in_dim()) + " != previous output dim " +
                        std::to_string(l.out_dim()));
  }
  if (!all_finite()) throw DataError("encoder parameters contain non-finite values");
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z;
  z.leaky_slope = leaky_slope;
  z.layers.reserve(layers.size());
  for (const auto& l : layers)
    z.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return z;
}

bool EncoderParams::all_zero() const {
  for (const auto& l : layers)
    if ((l.weight.array() != 0.0).any() || (l.bias.array() != 0.0).any()) return false;
  return true;
}

bool EncoderParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

EncoderParams init_encoder(const EncoderShape& shape, Rng& rng) {
  if (shape.input_dim < 1 || shape.output_dim < 1) throw ConfigError("encoder dims must be >= 1");
  std::vector<int> dims{shape.input_dim};
  for (int h : shape.hidden) {
    if (h < 1) throw ConfigError("hidden width must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(shape.output_dim);

  EncoderParams p;
  p.leaky_slope = shape.leaky_slope;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l{Matrix(dims[i + 1], dims[i]), Vector::Zero(dims[i + 1])};
    const double stddev = std::sqrt(2.0 / dims[i]);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = stddev * normal(rng);
    p.layers.push_back(std::move(l));
  }
  return p;
}

namespace {

void check_inputs(const EncoderParams& params, const Matrix& inputs) {
  if (params.layers.empty()) throw ConfigError("encoder has no layers");
  if (inputs.cols() != params.input_dim())
    throw ConfigError("input width " + std::to_string(inputs.cols()) +
                      " != encoder input dim " + std::to_string(params.input_dim()));
  if (!inputs.allFinite()) throw DataError("encoder input contains non-finite values");
}

Matrix leaky(const Matrix& z, double slope) {
  return z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

}  // namespace

Encoded encode(const EncoderParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  Encoded out;
  out.tape.input = inputs;
  out.tape.params = &params;
  Matrix h = inputs;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Matrix z = h * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    const bool last = i + 1 == params.layers.size();
    h = last ? z : leaky(z, params.leaky_slope);
    out.tape.pre_activations.push_back(std::move(z));
  }
  out.embeddings = std::move(h);
  return out;
}

Matrix encode_only(const EncoderParams& params, const Matrix& inputs) {
  check_inputs(params, inputs);
  Matrix h = inputs;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Matrix z = h * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    h = i + 1 == params.layers.size() ? z : leaky(z, params.leaky_slope);
  }
  return h;
}

EncoderParams backprop(const Tape& tape, const Matrix& embedding_grads) {
  if (tape.params == nullptr) throw ConfigError("tape was not produced by encode");
  const EncoderParams& params = *tape.params;
  const std::size_t depth = params.layers.size();
  if (tape.pre_activations.size() != depth)
    throw ConfigError("tape depth does not match encoder");
  const Matrix& out = tape.pre_activations.back();
  if (embedding_grads.rows() != out.rows() || embedding_grads.cols() != out.cols())
    throw ConfigError("embedding gradient shape does not match embeddings");

  EncoderParams grads = params.zeros_like();
  const double slope = params.leaky_slope;
  Matrix delta = embedding_grads;  // dL/dz for the current layer
  for (std::size_t k = depth; k-- > 0;) {
    const Matrix& z_prev_in =
        k == 0 ? tape.input : tape.pre_activations[k - 1];
    Matrix h_in = k == 0 ? z_prev_in : leaky(z_prev_in, slope);
    grads.layers[k].weight.noalias() = delta.transpose() * h_in;
    grads.layers[k].bias = delta.colwise().sum().transpose();
    if (k == 0) break;
    Matrix dh = delta * params.layers[k].weight;
    delta = dh.cwiseProduct(
        z_prev_in.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }));
  }
  return grads;
}

PreluResult prelu(const Vector& x, double slope) {
  PreluResult r{x, Vector(x.size())};
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const bool pos = x[i] > 0.0;
    r.value[i] = pos ? x[i] : slope * x[i];
    r.derivative[i] = pos ? 1.0 : slope;
  }
  return r;
}

void for_each_param(EncoderParams& p, const std::function<void(double&)>& fn) {
  for (auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) fn(l.weight.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) fn(l.bias.data()[i]);
  }
}

std::vector<double> flatten(const EncoderParams& p) {
  std::vector<double> out;
  out.reserve(p.parameter_count());
  for_each_param(const_cast<EncoderParams&>(p), [&](double& v) { out.push_back(v); });
  return out;
}

void unflatten(EncoderParams& p, std::span<const double> values) {
  if (values.size() != p.parameter_count())
    throw ConfigError("flat parameter vector has wrong length");
  std::size_t i = 0;
  for_each_param(p, [&](double& v) { v = values[i++]; });
}

GradCheckResult finite_difference_check(
    const std::function<double(std::span<const double>)>& loss, std::span<const double> point,
    std::span<const double> analytic, double h, double floor) {
  if (point.size() != analytic.size())
    throw ConfigError("gradient check: analytic gradient length differs from point");
  GradCheckResult r;
  std::vector<double> x(point.begin(), point.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = loss(x);
    x[i] = saved - h;
    const double down = loss(x);
    x[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst_index = i;
      r.analytic_at_worst = analytic[i];
      r.numeric_at_worst = numeric;
    }
  }
  return r;
}

}  // namespace bcareid
