// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "visrssi/dataset.hpp"
#include "visrssi/model.hpp"
#include "visrssi/optim.hpp"

namespace visrssi {

struct StageConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  double base_lr = 5e-3;
  double warmup_fraction = 0.05;
  double lambda_pl = 0.5;
  double lambda_sh = 0.5;
  bool freeze_image_encoder = true;
  AdamWConfig adamw;

  /// Frozen image encoder, batch 128, lr 5e-3.
  static StageConfig stage1();
  /// Full fine-tuning, batch 4, lr 5e-4.
  static StageConfig stage2();

  void validate() const;
  std::string to_text(const std::string& prefix) const;
};

struct LossBreakdown {
  double total = 0.0;
  double pl = 0.0;
  double sh = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double lr = 0.0;        ///< learning rate of the epoch's last step
  LossBreakdown train;
  LossBreakdown val;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<double> lr_per_step;
  std::size_t best_epoch = 0;  ///< 0 when no epoch ran
  double best_val_total = 0.0;
  double wall_clock_s = 0.0;

  /// epoch,lr,train_total,train_pl,train_sh,val_total,val_pl,val_sh
  std::string to_csv() const;
};

/// Mean and population deviation of the training-split targets.
TargetScaling fit_target_scaling(const PreparedDataset& data);

/// lambda_pl * MSE(pl) + lambda_sh * MSE(sh).
LossBreakdown composite_loss(std::span<const double> pred_pl, std::span<const double> pred_sh,
                             std::span<const double> gt_pl, std::span<const double> gt_sh, double lambda_pl,
                             double lambda_sh);
Graph::Var composite_loss(Graph& g, Graph::Var pred_pl, Graph::Var pred_sh, Graph::Var gt_pl, Graph::Var gt_sh,
                          double lambda_pl, double lambda_sh);

/// Forward-only image embeddings of `indices`, in chunks, [indices.size(), 128].
Tensor embed_samples(const Model& model, const PreparedDataset& data, const std::vector<std::size_t>& indices);

/// Loss of the model over `indices`.
LossBreakdown evaluate_loss(const Model& model, const PreparedDataset& data, const std::vector<std::size_t>& indices,
                            double lambda_pl, double lambda_sh);

/// Runs one stage and leaves the best-validation parameters in `model`.
/// When `checkpoint` is set the best parameters are also written there.
TrainReport train_stage(Model& model, const PreparedDataset& data, const StageConfig& cfg, std::uint64_t seed,
                        const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

struct TwoStageReport {
  TrainReport stage1;
  TrainReport stage2;
};

/// Fits the target scaling, then stage 1, then stage 2 from the stage-1 best parameters. With `out_dir`,
/// writes stage1_best.bin, stage2_best.bin and the two report CSVs.
TwoStageReport train_two_stage(Model& model, const PreparedDataset& data, const StageConfig& stage1,
                               const StageConfig& stage2, std::uint64_t seed,
                               const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace visrssi
