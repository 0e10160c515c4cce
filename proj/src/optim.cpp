// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "visrssi/errors.hpp"

namespace visrssi {

AdamW::AdamW(const ParameterSet& params, AdamWConfig config) : config_(config) {
  for (const auto& p : params) {
    state_.first_moment.emplace_back(p.value.shape());
    state_.second_moment.emplace_back(p.value.shape());
  }
}

void AdamW::reset() {
  for (auto& m : state_.first_moment) m.fill(0.0);
  for (auto& v : state_.second_moment) v.fill(0.0);
  state_.step = 0;
}

void AdamW::step(ParameterSet& params, double lr) {
  if (params.size() != state_.first_moment.size()) throw ShapeMismatch("optimizer state does not match parameters");
  state_.lr = lr;
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    if (p.frozen) continue;
    Tensor& m = state_.first_moment[k];
    Tensor& v = state_.second_moment[k];
    if (!p.grad.same_shape(p.value) || !m.same_shape(p.value)) throw ShapeMismatch("gradient shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.value[i] -= lr * config_.weight_decay * p.value[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.value[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

std::size_t LrSchedule::warmup_steps() const {
  return static_cast<std::size_t>(std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

double lr_at(const LrSchedule& schedule, std::size_t step) {
  if (step > schedule.total_steps) {
    throw StepOutOfRange("step " + std::to_string(step) + " exceeds total_steps " +
                         std::to_string(schedule.total_steps));
  }
  const std::size_t warmup = schedule.warmup_steps();
  if (step < warmup) return schedule.base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (schedule.total_steps <= warmup) return step >= schedule.total_steps ? 0.0 : schedule.base_lr;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(schedule.total_steps - warmup);
  return schedule.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace visrssi
