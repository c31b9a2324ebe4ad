#pragma once

#include <vector>

#include "persearch/embedding.hpp"

namespace persearch {

/// Linear warm-up from base to warmup_target over warmup_iters iterations,
/// then piecewise-constant with a multiplicative decay once the epoch reaches
/// each milestone.
struct LrSchedule {
  double base = 0.0;
  double warmup_target = 1e-3;
  long warmup_iters = 500;
  std::vector<int> milestone_epochs = {8, 11};
  std::vector<double> decay_factors = {0.1, 0.1};
};

inline void validate(const LrSchedule& s) {
  check(s.warmup_iters >= 0, "lr schedule: warmup_iters must be >= 0");
  check(s.warmup_target >= 0.0 && s.base >= 0.0, "lr schedule: rates must be >= 0");
  check(s.milestone_epochs.size() == s.decay_factors.size(),
        "lr schedule: milestones and factors must pair up");
  for (double f : s.decay_factors) check(f > 0.0 && f <= 1.0, "lr schedule: factors must be in (0,1]");
}

inline double lr_at(const LrSchedule& s, long iteration, int epoch) {
  if (s.warmup_iters > 0 && iteration < s.warmup_iters) {
    return s.base + (s.warmup_target - s.base) * static_cast<double>(iteration) /
                        static_cast<double>(s.warmup_iters);
  }
  double lr = s.warmup_target;
  for (std::size_t i = 0; i < s.milestone_epochs.size(); ++i)
    if (epoch >= s.milestone_epochs[i]) lr *= s.decay_factors[i];
  return lr;
}

}  // namespace persearch
