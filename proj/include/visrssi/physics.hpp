// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// Propagation relations linking received signal strength, path loss and the
// shadow-fading proxy. All quantities are in dB unless noted otherwise.

#pragma once

#include <cstddef>
#include <span>

namespace visrssi {

inline constexpr std::size_t kBeamCount = 64;

/// Log-distance path-loss model parameters.
struct PathLossParams {
  double exponent = 2.0;      ///< n, dimensionless
  double min_distance = 1.0;  ///< meters; distances below this are rejected

  void validate() const;
};

/// A decomposed link: rssi = -pl + sh.
struct LinkBudget {
  double pl_db = 0.0;
  double sh_db = 0.0;  ///< proxy P_t - beta
  double rssi_db = 0.0;
};

/// 10 * n * log10(d). Throws DistanceTooSmall when d < min_distance.
double path_loss(const PathLossParams& params, double distance_m);

/// Inverse of path_loss: the distance whose path loss equals `pl_db`.
double invert_distance(const PathLossParams& params, double pl_db);

/// Recombines the two predicted components into RSSI.
constexpr double compose_rssi(double pl_db, double sh_db) { return -pl_db + sh_db; }

/// Shadow-fading proxy target from a measured RSSI and the model path loss.
constexpr double sh_proxy_ground_truth(double rssi_db, double pl_db) { return rssi_db + pl_db; }

/// 10 * log10 of the mean of 64 strictly positive linear beam powers.
double beam_power_to_rssi(std::span<const double> beam_powers);

/// Builds a LinkBudget from measured rssi and distance.
LinkBudget decompose(const PathLossParams& params, double rssi_db, double distance_m);

}  // namespace visrssi
