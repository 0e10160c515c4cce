// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "visrssi/autodiff.hpp"

namespace visrssi {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// First/second moment accumulators mirroring a ParameterSet.
struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::size_t step = 0;
  double lr = 0.0;
};

/// AdamW with decoupled weight decay. Frozen parameters are never touched.
class AdamW {
 public:
  explicit AdamW(const ParameterSet& params, AdamWConfig config = {});

  /// Applies one update using the gradients currently stored in `params`.
  void step(ParameterSet& params, double lr);
  void reset();

  const OptimizerState& state() const { return state_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  OptimizerState state_;
};

/// Linear warmup from 0 to base_lr, then cosine decay to 0.
struct LrSchedule {
  double base_lr = 1e-3;
  double warmup_fraction = 0.05;
  std::size_t total_steps = 1;

  /// ceil(warmup_fraction * total_steps)
  std::size_t warmup_steps() const;
};

/// Throws StepOutOfRange when step > total_steps.
double lr_at(const LrSchedule& schedule, std::size_t step);

}  // namespace visrssi
