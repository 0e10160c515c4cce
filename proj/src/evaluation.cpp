// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "visrssi/errors.hpp"
#include "visrssi/training.hpp"

namespace visrssi {
namespace {

constexpr std::size_t kPredictChunk = 64;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
}

Tensor gather_positions(const PreparedDataset& data, const std::vector<std::size_t>& idx) {
  Tensor t(Shape{idx.size(), 2});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    t[2 * k] = data.samples.at(idx[k]).position.dx;
    t[2 * k + 1] = data.samples.at(idx[k]).position.dy;
  }
  return t;
}

template <class F>
Tensor gather_bboxes(const PreparedDataset& data, const std::vector<std::size_t>& idx, F&& transform) {
  const std::size_t per = kMaxBBox * kBBoxFields;
  Tensor t(Shape{idx.size(), kMaxBBox, kBBoxFields});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const BBoxTensor b = transform(data.samples.at(idx[k]).bboxes);
    std::copy_n(b.values.data(), per, t.data() + k * per);
  }
  return t;
}

template <class F>
std::vector<Prediction> predict_with(const Model& model, const PreparedDataset& data,
                                     const std::vector<std::size_t>& indices, const Tensor& embeddings,
                                     F&& transform) {
  std::vector<Prediction> out;
  out.reserve(indices.size());
  const std::size_t dim = embeddings.dim(1);
  for (std::size_t start = 0; start < indices.size(); start += kPredictChunk) {
    const std::size_t end = std::min(indices.size(), start + kPredictChunk);
    const std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                         indices.begin() + static_cast<std::ptrdiff_t>(end));
    Tensor emb(Shape{chunk.size(), dim});
    std::copy_n(embeddings.data() + start * dim, chunk.size() * dim, emb.data());
    const auto preds =
        model.predict_from_embeddings(emb, gather_positions(data, chunk), gather_bboxes(data, chunk, transform));
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

std::vector<double> field(std::span<const Prediction> p, double Prediction::*m) {
  std::vector<double> v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = p[i].*m;
  return v;
}

std::vector<double> field(std::span<const GroundTruth> p, double GroundTruth::*m) {
  std::vector<double> v(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) v[i] = p[i].*m;
  return v;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

ComponentMetrics component_metrics(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size())
    throw LengthMismatch("metrics: " + std::to_string(predicted.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " targets");
  if (predicted.empty()) throw EmptyInput("metrics: no samples");
  const std::size_t n = predicted.size();
  std::vector<double> sq(n), ab(n);
  ComponentMetrics m;
  std::size_t within = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = predicted[i] - truth[i];
    sq[i] = e * e;
    ab[i] = std::abs(e);
    if (ab[i] <= 1.0) ++within;
    const double bin = std::floor(ab[i] / kHistogramBinWidth);
    const std::size_t slot = (std::isfinite(bin) && bin < static_cast<double>(kHistogramBins))
                                 ? static_cast<std::size_t>(bin)
                                 : kHistogramBins;
    ++m.histogram[slot];
  }
  const double dn = static_cast<double>(n);
  m.rmse = std::sqrt(pairwise_sum(sq) / dn);
  m.mae = pairwise_sum(ab) / dn;
  m.tol_1db = 100.0 * static_cast<double>(within) / dn;
  return m;
}

MetricsReport compute_metrics(std::span<const Prediction> predictions, std::span<const GroundTruth> truth) {
  if (predictions.size() != truth.size())
    throw LengthMismatch("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " targets");
  MetricsReport r;
  r.count = predictions.size();
  r.pl = component_metrics(field(predictions, &Prediction::pl), field(truth, &GroundTruth::pl));
  r.sh = component_metrics(field(predictions, &Prediction::sh), field(truth, &GroundTruth::sh));
  r.rssi = component_metrics(field(predictions, &Prediction::rssi), field(truth, &GroundTruth::rssi));
  return r;
}

std::vector<GroundTruth> ground_truth(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  std::vector<GroundTruth> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const Sample& s = samples.at(i);
    out.push_back({s.gt_pl, s.gt_sh, s.gt_rssi});
  }
  return out;
}

std::vector<Prediction> predict_samples(const Model& model, const PreparedDataset& data,
                                        const std::vector<std::size_t>& indices) {
  return predict_with(model, data, indices, embed_samples(model, data, indices),
                      [](const BBoxTensor& b) { return b; });
}

BBoxTensor tx_only(const BBoxTensor& bboxes) {
  BBoxTensor out;
  std::copy_n(bboxes.row(0), kBBoxFields, out.row(0));
  return out;
}

InterferenceResult interference_experiment(const Model& model, const PreparedDataset& data,
                                           const std::vector<std::size_t>& indices) {
  const Tensor emb = embed_samples(model, data, indices);
  const auto truth = ground_truth(data.samples, indices);
  const auto full = predict_with(model, data, indices, emb, [](const BBoxTensor& b) { return b; });
  const auto reduced = predict_with(model, data, indices, emb, [](const BBoxTensor& b) { return tx_only(b); });
  InterferenceResult r;
  r.full = compute_metrics(full, truth);
  r.tx_only = compute_metrics(reduced, truth);
  r.rssi_rmse_increase = r.tx_only.rssi.rmse - r.full.rssi.rmse;
  return r;
}

AblationResult bbox_ablation(const Model& with_model, const PreparedDataset& with_data, const Model& without_model,
                             const PreparedDataset& without_data, int dropped_class) {
  const auto& a = with_data.split.test;
  const auto& b = without_data.split.test;
  if (a.size() != b.size()) throw ConfigMismatch("ablation: test splits differ in size");
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Sample& sa = with_data.samples.at(a[k]);
    const Sample& sb = without_data.samples.at(b[k]);
    if (sa.id != sb.id || sa.gt_pl != sb.gt_pl || sa.gt_sh != sb.gt_sh || sa.east_m != sb.east_m ||
        sa.north_m != sb.north_m)
      throw ConfigMismatch("ablation: sample " + sa.id + " differs between the two datasets");
    for (std::size_t slot = 0; slot < kMaxBBox; ++slot) {
      const double* row = sb.bboxes.row(slot);
      const bool used = row[3] > 0.0 || row[4] > 0.0;
      if (used && static_cast<int>(row[0]) == dropped_class)
        throw ConfigMismatch("ablation: sample " + sb.id + " still holds a box of the dropped class");
    }
  }
  if (with_model.config().bbox_encoder != without_model.config().bbox_encoder)
    throw ConfigMismatch("ablation: models use different bbox encoders");
  AblationResult r;
  r.with_class = compute_metrics(predict_samples(with_model, with_data, a), ground_truth(with_data.samples, a));
  r.without_class =
      compute_metrics(predict_samples(without_model, without_data, b), ground_truth(without_data.samples, b));
  r.rssi_rmse_increase = r.without_class.rssi.rmse - r.with_class.rssi.rmse;
  return r;
}

std::string metrics_csv(const MetricsReport& report) {
  std::string out = "component,rmse,mae,tol_1db\n";
  auto row = [&](const char* name, const ComponentMetrics& m) {
    out += std::string(name) + "," + fmt(m.rmse) + "," + fmt(m.mae) + "," + fmt(m.tol_1db) + "\n";
  };
  row("pl", report.pl);
  row("sh", report.sh);
  row("rssi", report.rssi);
  return out;
}

std::string histogram_csv(const ComponentMetrics& metrics) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < metrics.histogram.size(); ++i) {
    const double lo = static_cast<double>(i) * kHistogramBinWidth;
    const std::string hi = i < kHistogramBins ? fmt(lo + kHistogramBinWidth) : std::string("inf");
    out += fmt(lo) + "," + hi + "," + std::to_string(metrics.histogram[i]) + "\n";
  }
  return out;
}

void write_reports(const std::filesystem::path& dir, const MetricsReport& report, const std::string& prefix) {
  if (report.count == 0) throw EmptyInput("refusing to write an empty metrics report");
  std::filesystem::create_directories(dir);
  write_text(dir / (prefix + "metrics.csv"), metrics_csv(report));
  write_text(dir / (prefix + "hist_pl.csv"), histogram_csv(report.pl));
  write_text(dir / (prefix + "hist_sh.csv"), histogram_csv(report.sh));
  write_text(dir / (prefix + "hist_rssi.csv"), histogram_csv(report.rssi));
}

}  // namespace visrssi
