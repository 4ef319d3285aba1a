#include <cmath>

#include "bcareid/errors.hpp"
#include "bcareid/numerics.hpp"

namespace bcareid {

AdamState AdamState::for_params(const EncoderParams& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

namespace {

bool same_layout(const EncoderParams& a, const EncoderParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
        a.layers[i].weight.cols() != b.layers[i].weight.cols() ||
        a.layers[i].bias.size() != b.layers[i].bias.size())
      return false;
  }
  return true;
}

void update(Eigen::Ref<Eigen::ArrayXd> param, const Eigen::Ref<const Eigen::ArrayXd>& grad,
            Eigen::Ref<Eigen::ArrayXd> m, Eigen::Ref<Eigen::ArrayXd> v, const AdamState& s,
            double step_size, double eps_hat) {
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.square();
  param -= step_size * m / (v.sqrt() + eps_hat);
}

}  // namespace

void adam_step(EncoderParams& params, const EncoderParams& grads, AdamState& state, double rate) {
  if (!(rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (!same_layout(params, grads) || !same_layout(params, state.first_moment) ||
      !same_layout(params, state.second_moment))
    throw ConfigError("adam: parameter, gradient and moment shapes differ");
  if (!grads.all_finite()) throw TrainingError("adam: non-finite gradient");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  // Equivalent to m_hat / (sqrt(v_hat) + eps) with the corrections folded in.
  const double step_size = rate * std::sqrt(c2) / c1;
  const double eps_hat = state.epsilon * std::sqrt(c2);

  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    const auto& g = grads.layers[i];
    auto& m = state.first_moment.layers[i];
    auto& v = state.second_moment.layers[i];
    using Arr = Eigen::Map<Eigen::ArrayXd>;
    using CArr = Eigen::Map<const Eigen::ArrayXd>;
    update(Arr(p.weight.data(), p.weight.size()), CArr(g.weight.data(), g.weight.size()),
           Arr(m.weight.data(), m.weight.size()), Arr(v.weight.data(), v.weight.size()), state,
           step_size, eps_hat);
    update(Arr(p.bias.data(), p.bias.size()), CArr(g.bias.data(), g.bias.size()),
           Arr(m.bias.data(), m.bias.size()), Arr(v.bias.data(), v.bias.size()), state,
           step_size, eps_hat);
  }
}

FlatAdam::FlatAdam(std::size_t n, double beta1, double beta2, double epsilon)
    : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void FlatAdam::step(std::span<double> params, std::span<const double> grads, double rate) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ConfigError("adam: parameter and gradient lengths differ");
  for (double g : grads)
    if (!std::isfinite(g)) throw TrainingError("adam: non-finite gradient");
  step_ += 1;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(beta1_, t);
  const double c2 = 1.0 - std::pow(beta2_, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i] * grads[i];
    params[i] -= rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + epsilon_);
  }
}

double schedule_rate(const Schedule& schedule, int epoch) {
  if (schedule.total_epochs < 1) throw ConfigError("schedule needs total_epochs >= 1");
  if (epoch < 0 || epoch > schedule.total_epochs)
    throw ConfigError("epoch " + std::to_string(epoch) + " outside [0, " +
                      std::to_string(schedule.total_epochs) + "]");
  if (epoch == schedule.total_epochs) return 0.0;
  return schedule.base_rate *
         (1.0 - static_cast<double>(epoch) / static_cast<double>(schedule.total_epochs));
}

}  // namespace bcareid
