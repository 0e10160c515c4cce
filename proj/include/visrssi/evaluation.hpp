// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "visrssi/dataset.hpp"
#include "visrssi/model.hpp"

namespace visrssi {

inline constexpr double kHistogramBinWidth = 0.25;  // dB
inline constexpr std::size_t kHistogramBins = 20;    // plus one overflow bin

struct ComponentMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double tol_1db = 0.0;  ///< percentage with |error| <= 1 dB
  std::vector<std::size_t> histogram = std::vector<std::size_t>(kHistogramBins + 1, 0);
};

struct MetricsReport {
  std::size_t count = 0;
  ComponentMetrics pl;
  ComponentMetrics sh;
  ComponentMetrics rssi;
};

/// Sum with pairwise reduction.
double pairwise_sum(std::span<const double> values);

/// Metrics of predicted-minus-true errors. Throws LengthMismatch / EmptyInput.
ComponentMetrics component_metrics(std::span<const double> predicted, std::span<const double> truth);

struct GroundTruth {
  double pl = 0.0;
  double sh = 0.0;
  double rssi = 0.0;
};

MetricsReport compute_metrics(std::span<const Prediction> predictions, std::span<const GroundTruth> truth);
std::vector<GroundTruth> ground_truth(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

/// Predictions for `indices`, evaluated in fixed-size chunks.
std::vector<Prediction> predict_samples(const Model& model, const PreparedDataset& data,
                                        const std::vector<std::size_t>& indices);

/// Bounding-box tensor with every slot but the Tx zeroed.
BBoxTensor tx_only(const BBoxTensor& bboxes);

struct InterferenceResult {
  MetricsReport full;
  MetricsReport tx_only;
  /// RSSI RMSE with Tx-only boxes minus RSSI RMSE with all boxes.
  double rssi_rmse_increase = 0.0;
};

InterferenceResult interference_experiment(const Model& model, const PreparedDataset& data,
                                           const std::vector<std::size_t>& indices);

struct AblationResult {
  MetricsReport with_class;
  MetricsReport without_class;
  double rssi_rmse_increase = 0.0;
};

/// Compares a model trained with all boxes to one trained without `dropped_class`.
/// The two datasets must hold the same samples apart from the dropped boxes.
AblationResult bbox_ablation(const Model& with_model, const PreparedDataset& with_data, const Model& without_model,
                             const PreparedDataset& without_data, int dropped_class);

/// component,rmse,mae,tol_1db
std::string metrics_csv(const MetricsReport& report);
/// bin_lo,bin_hi,count; the last row is the overflow bin.
std::string histogram_csv(const ComponentMetrics& metrics);
/// metrics.csv plus hist_pl.csv, hist_sh.csv, hist_rssi.csv. Throws EmptyInput on an empty report.
void write_reports(const std::filesystem::path& dir, const MetricsReport& report, const std::string& prefix = "");

}  // namespace visrssi
