#pragma once

#include <vector>

#include "persearch/embedding.hpp"

namespace persearch {

// Flat concatenation of all trainable encoder parameters, in the fixed order
// documented in encoder.hpp.
using ParameterVector = std::vector<double>;

/// Online parameters (theta, updated by the optimizer) together with their
/// slow-moving average (theta_bar, updated only by ema_update).
struct DualEncoderState {
  ParameterVector online;
  ParameterVector average;
  double momentum = 0.999;  // m
};

inline DualEncoderState init_dual(const ParameterVector& theta, double m) {
  check(m >= 0.0 && m <= 1.0, "init_dual: momentum must be in [0,1]");
  check(all_finite(theta), "init_dual: non-finite parameters");
  return DualEncoderState{theta, theta, m};
}

/// average <- m * average + (1 - m) * new_theta, elementwise; online <- new_theta.
inline void ema_update(DualEncoderState& state, const ParameterVector& new_theta) {
  check(new_theta.size() == state.average.size(), "ema_update: length mismatch");
  check(all_finite(new_theta), "ema_update: non-finite parameters");
  const double m = state.momentum;
  for (std::size_t i = 0; i < state.average.size(); ++i)
    state.average[i] = m * state.average[i] + (1.0 - m) * new_theta[i];
  state.online = new_theta;
}

}  // namespace persearch
