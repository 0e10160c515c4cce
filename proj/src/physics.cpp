// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/physics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "visrssi/errors.hpp"

namespace visrssi {

void PathLossParams::validate() const {
  if (!(exponent > 0.0)) throw Error("path-loss exponent must be > 0");
  if (!(min_distance > 0.0)) throw Error("minimum distance must be > 0");
}

double path_loss(const PathLossParams& params, double distance_m) {
  if (!(distance_m >= params.min_distance)) {
    throw DistanceTooSmall("distance " + std::to_string(distance_m) + " m is below the minimum of " +
                           std::to_string(params.min_distance) + " m");
  }
  return 10.0 * params.exponent * std::log10(distance_m);
}

double invert_distance(const PathLossParams& params, double pl_db) {
  return std::pow(10.0, pl_db / (10.0 * params.exponent));
}

double beam_power_to_rssi(std::span<const double> beam_powers) {
  if (beam_powers.size() != kBeamCount) {
    throw WrongBeamCount("expected " + std::to_string(kBeamCount) + " beam powers, got " +
                         std::to_string(beam_powers.size()));
  }
  double sum = 0.0;
  for (double p : beam_powers) {
    if (!(p > 0.0) || !std::isfinite(p)) throw EmptyOrNonPositivePower("beam power must be positive and finite");
  }
  // Sorted summation keeps the result independent of beam ordering.
  double sorted[kBeamCount];
  std::copy(beam_powers.begin(), beam_powers.end(), sorted);
  std::sort(sorted, sorted + kBeamCount);
  for (double p : sorted) sum += p;
  return 10.0 * std::log10(sum / static_cast<double>(kBeamCount));
}

LinkBudget decompose(const PathLossParams& params, double rssi_db, double distance_m) {
  LinkBudget lb;
  lb.pl_db = path_loss(params, distance_m);
  lb.sh_db = sh_proxy_ground_truth(rssi_db, lb.pl_db);
  lb.rssi_db = rssi_db;
  return lb;
}

}  // namespace visrssi
