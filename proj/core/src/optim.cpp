#include "arnet/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "arnet/errors.hpp"

namespace arnet {
namespace {

struct StepScalars {
  double lr, beta1, beta2, epsilon, correction1, correction2;
};

template <typename Param, typename Grad, typename Moment>
void update(Param& theta, const Grad& g, Moment& m, Moment& v, const StepScalars& k) {
  m = k.beta1 * m + (1.0 - k.beta1) * g;
  v = k.beta2 * v + (1.0 - k.beta2) * g * g;
  theta -= k.lr * (m / k.correction1) / (std::sqrt(v / k.correction2) + k.epsilon);
}

template <typename Param, typename Grad, typename Moment>
void update_array(Param& theta, const Grad& g, Moment& m, Moment& v, const StepScalars& k) {
  m = k.beta1 * m.array() + (1.0 - k.beta1) * g.array();
  v = k.beta2 * v.array() + (1.0 - k.beta2) * g.array().square();
  theta.array() -=
      k.lr * (m.array() / k.correction1) / ((v.array() / k.correction2).sqrt() + k.epsilon);
}

}  // namespace

AdamState::AdamState(Eigen::Index feature_dim, AdamConfig cfg)
    : config(cfg),
      first_moment(ParameterGradients::zeros(feature_dim)),
      second_moment(ParameterGradients::zeros(feature_dim)) {
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be > 0");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.epsilon >= 0.0)) throw std::invalid_argument("Adam epsilon must be >= 0");
}

void adam_step(ModelParameters& params, const ParameterGradients& grads, AdamState& state) {
  const auto f = params.feature_dim();
  if (!params.shapes_consistent() || !grads.shapes_consistent() || grads.feature_dim() != f ||
      state.first_moment.feature_dim() != f) {
    throw ShapeError("adam_step: parameter, gradient and state shapes disagree");
  }
  if (!grads.all_finite()) throw DivergenceError("adam_step: non-finite gradient");

  const auto& cfg = state.config;
  const double step = static_cast<double>(state.step_count + 1);
  const StepScalars k{cfg.learning_rate,
                      cfg.beta1,
                      cfg.beta2,
                      cfg.epsilon,
                      1.0 - std::pow(cfg.beta1, step),
                      1.0 - std::pow(cfg.beta2, step)};

  auto& m = state.first_moment;
  auto& v = state.second_moment;
  update_array(params.w_fc, grads.w_fc, m.w_fc, v.w_fc, k);
  update_array(params.b_fc, grads.b_fc, m.b_fc, v.b_fc, k);
  update_array(params.w_ar, grads.w_ar, m.w_ar, v.w_ar, k);
  update(params.b_ar, grads.b_ar, m.b_ar, v.b_ar, k);
  ++state.step_count;
}

}  // namespace arnet
