// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "visrssi/errors.hpp"
#include "visrssi/rng.hpp"
#include "visrssi/serialize.hpp"

namespace visrssi {
namespace {

constexpr std::size_t kEvalChunk = 32;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct BatchTensors {
  Tensor positions;
  Tensor bboxes;
  Tensor gt_pl;
  Tensor gt_sh;
};

BatchTensors gather(const PreparedDataset& data, std::span<const std::size_t> idx) {
  BatchTensors b{Tensor(Shape{idx.size(), 2}), Tensor(Shape{idx.size(), kMaxBBox, kBBoxFields}),
                 Tensor(Shape{idx.size()}), Tensor(Shape{idx.size()})};
  const std::size_t per = kMaxBBox * kBBoxFields;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Sample& s = data.samples.at(idx[k]);
    b.positions[2 * k] = s.position.dx;
    b.positions[2 * k + 1] = s.position.dy;
    std::copy_n(s.bboxes.values.data(), per, b.bboxes.data() + k * per);
    b.gt_pl[k] = s.gt_pl;
    b.gt_sh[k] = s.gt_sh;
  }
  return b;
}

Tensor rows(const Tensor& table, std::span<const std::size_t> which) {
  const std::size_t w = table.dim(1);
  Tensor out(Shape{which.size(), w});
  for (std::size_t k = 0; k < which.size(); ++k) std::copy_n(table.data() + which[k] * w, w, out.data() + k * w);
  return out;
}

// Loss over `indices` using precomputed embeddings (rows aligned with indices).
LossBreakdown loss_from_embeddings(const Model& model, const PreparedDataset& data,
                                   const std::vector<std::size_t>& indices, const Tensor& embeddings,
                                   double lambda_pl, double lambda_sh) {
  std::vector<double> ppl, psh, gpl, gsh;
  for (std::size_t start = 0; start < indices.size(); start += 256) {
    const std::size_t end = std::min(indices.size(), start + 256);
    std::span<const std::size_t> idx(indices.data() + start, end - start);
    std::vector<std::size_t> local(idx.size());
    std::iota(local.begin(), local.end(), start);
    const BatchTensors b = gather(data, idx);
    const auto preds = model.predict_from_embeddings(rows(embeddings, local), b.positions, b.bboxes);
    for (std::size_t k = 0; k < preds.size(); ++k) {
      ppl.push_back(preds[k].pl);
      psh.push_back(preds[k].sh);
      gpl.push_back(b.gt_pl[k]);
      gsh.push_back(b.gt_sh[k]);
    }
  }
  return composite_loss(ppl, psh, gpl, gsh, lambda_pl, lambda_sh);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
}

}  // namespace

StageConfig StageConfig::stage1() { return StageConfig{}; }

StageConfig StageConfig::stage2() {
  StageConfig c;
  c.batch_size = 4;
  c.base_lr = 5e-4;
  c.freeze_image_encoder = false;
  return c;
}

void StageConfig::validate() const {
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (!(lambda_pl >= 0.0 && lambda_sh >= 0.0)) throw Error("loss weights must be >= 0");
  if (!(base_lr >= 0.0)) throw Error("learning rate must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) throw Error("warmup fraction must be in [0,1]");
}

std::string StageConfig::to_text(const std::string& prefix) const {
  std::ostringstream os;
  os << prefix << "epochs=" << epochs << "\n"
     << prefix << "batch_size=" << batch_size << "\n"
     << prefix << "optimizer=adamw\n"
     << prefix << "base_lr=" << fmt(base_lr) << "\n"
     << prefix << "lr_schedule=warmup+cosine\n"
     << prefix << "warmup_fraction=" << fmt(warmup_fraction) << "\n"
     << prefix << "lambda_pl=" << fmt(lambda_pl) << "\n"
     << prefix << "lambda_sh=" << fmt(lambda_sh) << "\n"
     << prefix << "freeze_image_encoder=" << (freeze_image_encoder ? "true" : "false") << "\n"
     << prefix << "beta1=" << fmt(adamw.beta1) << "\n"
     << prefix << "beta2=" << fmt(adamw.beta2) << "\n"
     << prefix << "eps=" << fmt(adamw.eps) << "\n"
     << prefix << "weight_decay=" << fmt(adamw.weight_decay) << "\n";
  return os.str();
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,lr,train_total,train_pl,train_sh,val_total,val_pl,val_sh\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + fmt(e.lr) + "," + fmt(e.train.total) + "," + fmt(e.train.pl) + "," +
           fmt(e.train.sh) + "," + fmt(e.val.total) + "," + fmt(e.val.pl) + "," + fmt(e.val.sh) + "\n";
  }
  return out;
}

TargetScaling fit_target_scaling(const PreparedDataset& data) {
  const auto& train = data.split.train;
  if (train.empty()) throw EmptySplit("training split is empty");
  auto moments = [&](double Sample::*field) {
    double mean = 0.0;
    for (std::size_t i : train) mean += data.samples.at(i).*field;
    mean /= static_cast<double>(train.size());
    double var = 0.0;
    for (std::size_t i : train) {
      const double d = data.samples.at(i).*field - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(train.size()));
    return std::pair{mean, sd > 1e-12 ? sd : 1.0};
  };
  const auto [pl_mean, pl_std] = moments(&Sample::gt_pl);
  const auto [sh_mean, sh_std] = moments(&Sample::gt_sh);
  return {pl_mean, pl_std, sh_mean, sh_std};
}

LossBreakdown composite_loss(std::span<const double> pred_pl, std::span<const double> pred_sh,
                             std::span<const double> gt_pl, std::span<const double> gt_sh, double lambda_pl,
                             double lambda_sh) {
  if (pred_pl.size() != gt_pl.size() || pred_sh.size() != gt_sh.size() || pred_pl.size() != pred_sh.size() ||
      pred_pl.empty())
    throw ShapeMismatch("composite_loss: prediction and target batches differ in size");
  auto mse = [](std::span<const double> p, std::span<const double> t) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
    return s / static_cast<double>(p.size());
  };
  LossBreakdown l;
  l.pl = mse(pred_pl, gt_pl);
  l.sh = mse(pred_sh, gt_sh);
  l.total = lambda_pl * l.pl + lambda_sh * l.sh;
  return l;
}

Graph::Var composite_loss(Graph& g, Graph::Var pred_pl, Graph::Var pred_sh, Graph::Var gt_pl, Graph::Var gt_sh,
                          double lambda_pl, double lambda_sh) {
  return g.add(g.scale(g.mse(pred_pl, gt_pl), lambda_pl), g.scale(g.mse(pred_sh, gt_sh), lambda_sh));
}

Tensor embed_samples(const Model& model, const PreparedDataset& data, const std::vector<std::size_t>& indices) {
  const std::size_t dim = model.config().image_embedding_dim;
  Tensor out(Shape{indices.size(), dim});
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t end = std::min(indices.size(), start + kEvalChunk);
    const std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                         indices.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor emb = model.embed_images(image_batch(data.samples, chunk, data.stats));
    std::copy_n(emb.data(), emb.size(), out.data() + start * dim);
  }
  return out;
}

LossBreakdown evaluate_loss(const Model& model, const PreparedDataset& data, const std::vector<std::size_t>& indices,
                            double lambda_pl, double lambda_sh) {
  if (indices.empty()) throw EmptySplit("cannot evaluate loss on an empty split");
  return loss_from_embeddings(model, data, indices, embed_samples(model, data, indices), lambda_pl, lambda_sh);
}

TrainReport train_stage(Model& model, const PreparedDataset& data, const StageConfig& cfg, std::uint64_t seed,
                        const std::optional<std::filesystem::path>& checkpoint) {
  cfg.validate();
  const auto& train = data.split.train;
  const auto& val = data.split.val;
  if (train.empty()) throw EmptySplit("training split is empty");
  if (val.empty()) throw EmptySplit("validation split is empty");

  const auto t_start = std::chrono::steady_clock::now();
  TrainReport report;
  model.set_image_encoder_frozen(cfg.freeze_image_encoder);
  ParameterSet& params = model.params();

  const std::size_t n = train.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  LrSchedule schedule{cfg.base_lr, cfg.warmup_fraction, cfg.epochs * batches};
  AdamW opt(params, cfg.adamw);

  // A frozen encoder is a fixed function of the image; embed once.
  Tensor train_emb, val_emb;
  if (cfg.freeze_image_encoder && cfg.epochs > 0) {
    train_emb = embed_samples(model, data, train);
    val_emb = embed_samples(model, data, val);
  }
  std::vector<std::size_t> position_of(data.samples.size(), 0);
  for (std::size_t k = 0; k < n; ++k) position_of[train[k]] = k;

  double best = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_params;
  std::vector<std::size_t> order(train);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(seed, 0xe90c0000ULL + epoch));
    rng.shuffle(std::span<std::size_t>(order));
    double sum_total = 0.0, sum_pl = 0.0, sum_sh = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const BatchTensors bt = gather(data, idx);

      Graph g;
      Model::Heads heads;
      if (cfg.freeze_image_encoder) {
        std::vector<std::size_t> local(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) local[k] = position_of[idx[k]];
        heads = model.forward_from_embedding(g, g.input(rows(train_emb, local)), g.input(bt.positions),
                                             g.input(bt.bboxes));
      } else {
        const std::vector<std::size_t> ids(idx.begin(), idx.end());
        heads = model.forward(g, g.input(image_batch(data.samples, ids, data.stats)), g.input(bt.positions),
                              g.input(bt.bboxes));
      }
      const Graph::Var gpl = g.input(bt.gt_pl), gsh = g.input(bt.gt_sh);
      const Graph::Var loss = composite_loss(g, heads.pl, heads.sh, gpl, gsh, cfg.lambda_pl, cfg.lambda_sh);
      const double loss_value = g.value(loss).item();
      if (!std::isfinite(loss_value)) {
        throw NonFiniteLoss("non-finite loss in epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b) +
                            " (step " + std::to_string(step) + ")");
      }
      params.zero_grad();
      g.backward(loss);
      lr = lr_at(schedule, step);
      opt.step(params, lr);
      report.lr_per_step.push_back(lr);
      ++step;

      const double w = static_cast<double>(idx.size());
      const LossBreakdown parts = composite_loss(g.value(heads.pl).values(), g.value(heads.sh).values(),
                                                 bt.gt_pl.values(), bt.gt_sh.values(), cfg.lambda_pl, cfg.lambda_sh);
      sum_total += w * parts.total;
      sum_pl += w * parts.pl;
      sum_sh += w * parts.sh;
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = lr;
    rec.train = {sum_total / static_cast<double>(n), sum_pl / static_cast<double>(n), sum_sh / static_cast<double>(n)};
    rec.val = cfg.freeze_image_encoder
                  ? loss_from_embeddings(model, data, val, val_emb, cfg.lambda_pl, cfg.lambda_sh)
                  : evaluate_loss(model, data, val, cfg.lambda_pl, cfg.lambda_sh);
    if (!std::isfinite(rec.val.total))
      throw NonFiniteLoss("non-finite validation loss after epoch " + std::to_string(epoch + 1));
    if (rec.val.total < best) {
      best = rec.val.total;
      best_params = params.snapshot();
      report.best_epoch = rec.epoch;
      report.best_val_total = best;
    }
    report.epochs.push_back(rec);
  }

  if (!best_params.empty()) params.restore(best_params);
  if (checkpoint) save_parameters(*checkpoint, params);
  report.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return report;
}

TwoStageReport train_two_stage(Model& model, const PreparedDataset& data, const StageConfig& stage1,
                               const StageConfig& stage2, std::uint64_t seed,
                               const std::optional<std::filesystem::path>& out_dir) {
  TwoStageReport r;
  model.set_target_scaling(fit_target_scaling(data));
  auto path = [&](const char* name) -> std::optional<std::filesystem::path> {
    if (!out_dir) return std::nullopt;
    return *out_dir / name;
  };
  r.stage1 = train_stage(model, data, stage1, derive_seed(seed, 1), path("stage1_best.bin"));
  r.stage2 = train_stage(model, data, stage2, derive_seed(seed, 2), path("stage2_best.bin"));
  if (out_dir) {
    write_text(*out_dir / "stage1_report.csv", r.stage1.to_csv());
    write_text(*out_dir / "stage2_report.csv", r.stage2.to_csv());
  }
  return r;
}

}  // namespace visrssi
