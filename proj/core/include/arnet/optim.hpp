#pragma once

#include <cstdint>

#include "arnet/netcore.hpp"

namespace arnet {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for every parameter plus the step counter.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  ParameterGradients first_moment;
  ParameterGradients second_moment;

  AdamState(Eigen::Index feature_dim, AdamConfig cfg);
};

/// One bias-corrected Adam update, in place. Non-finite gradients throw
/// DivergenceError and leave both `params` and `state` untouched.
void adam_step(ModelParameters& params, const ParameterGradients& grads, AdamState& state);

}  // namespace arnet
