// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset. Exit status is 0 only when every selected
// criterion passes.

#include <sys/wait.h>

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "visrssi/autodiff.hpp"
#include "visrssi/dataset.hpp"
#include "visrssi/evaluation.hpp"
#include "visrssi/model.hpp"
#include "visrssi/physics.hpp"
#include "visrssi/rng.hpp"
#include "visrssi/scene_sim.hpp"
#include "visrssi/serialize.hpp"
#include "visrssi/training.hpp"

using namespace visrssi;
using visrssi::testing::check_gradients;
using visrssi::testing::fill_away_from_zero;
using visrssi::testing::fill_uniform;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kGradRelTol = 1e-4;
constexpr double kFdStep = 1e-4;
constexpr std::size_t kCoordsPerLayer = 20;
constexpr double kRoundTripRelTol = 1e-9;
constexpr double kIdentityTolDb = 1e-12;
constexpr double kMetricOracleTol = 1e-10;
constexpr std::size_t kLearnSamples = 2000;
constexpr std::size_t kLearnEpochs = 30;
constexpr double kRssiRmseMaxDb = 2.0;
constexpr double kPlRmseMaxDb = 0.5;
constexpr double kNoiseFloorRelTol = 0.15;
constexpr double kInterferenceRatio = 0.5;
constexpr double kAblationSignDb = 2.0;
constexpr std::size_t kAblationSamples = 2000;
constexpr double kParamBudget = 2.6e6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ------------------------------------------------------------------ 1

struct LayerCase {
  std::string name;
  std::function<void(ParameterSet&, Rng&)> init;
  std::function<Graph::Var(Graph&, ParameterSet&)> build;
};

Graph::Var loss_against(Graph& g, Graph::Var y, std::uint64_t seed) {
  Tensor target(g.value(y).shape());
  Rng rng(seed);
  fill_uniform(target, rng);
  return g.mse(y, g.input(target));
}

std::vector<LayerCase> layer_cases() {
  std::vector<LayerCase> c;
  c.push_back({"linear",
               [](ParameterSet& p, Rng& r) {
                 fill_uniform(p[p.add("x", Shape{4, 7})].value, r);
                 fill_uniform(p[p.add("w", Shape{5, 7})].value, r);
                 fill_uniform(p[p.add("b", Shape{5})].value, r);
               },
               [](Graph& g, ParameterSet& p) {
                 return loss_against(g, g.linear(g.param(p[0]), g.param(p[1]), g.param(p[2])), 1);
               }});
  c.push_back({"relu", [](ParameterSet& p, Rng& r) { fill_away_from_zero(p[p.add("x", Shape{6, 8})].value, r); },
               [](Graph& g, ParameterSet& p) { return loss_against(g, g.relu(g.param(p[0])), 2); }});
  c.push_back({"conv1d_k1",
               [](ParameterSet& p, Rng& r) {
                 fill_uniform(p[p.add("x", Shape{3, 5, 10})].value, r);
                 fill_uniform(p[p.add("w", Shape{32, 5})].value, r);
                 fill_uniform(p[p.add("b", Shape{32})].value, r);
               },
               [](Graph& g, ParameterSet& p) {
                 return loss_against(g, g.conv1d_k1(g.param(p[0]), g.param(p[1]), g.param(p[2])), 3);
               }});
  c.push_back({"adaptive_avg_pool1d", [](ParameterSet& p, Rng& r) { fill_uniform(p[p.add("x", Shape{2, 6, 10})].value, r); },
               [](Graph& g, ParameterSet& p) { return loss_against(g, g.adaptive_avg_pool1d(g.param(p[0])), 4); }});
  c.push_back({"conv2d",
               [](ParameterSet& p, Rng& r) {
                 fill_uniform(p[p.add("x", Shape{2, 3, 9, 8})].value, r);
                 fill_uniform(p[p.add("w", Shape{4, 3, 3, 3})].value, r);
                 fill_uniform(p[p.add("b", Shape{4})].value, r);
               },
               [](Graph& g, ParameterSet& p) {
                 return loss_against(g, g.conv2d(g.param(p[0]), g.param(p[1]), g.param(p[2]), 2, 1), 5);
               }});
  c.push_back({"global_avg_pool2d", [](ParameterSet& p, Rng& r) { fill_uniform(p[p.add("x", Shape{2, 4, 5, 6})].value, r); },
               [](Graph& g, ParameterSet& p) { return loss_against(g, g.global_avg_pool2d(g.param(p[0])), 6); }});
  c.push_back({"concat",
               [](ParameterSet& p, Rng& r) {
                 fill_uniform(p[p.add("a", Shape{3, 4})].value, r);
                 fill_uniform(p[p.add("b", Shape{3, 6})].value, r);
               },
               [](Graph& g, ParameterSet& p) {
                 const Graph::Var parts[] = {g.param(p[0]), g.param(p[1])};
                 return loss_against(g, g.concat(parts), 7);
               }});
  c.push_back({"reshape+transpose", [](ParameterSet& p, Rng& r) { fill_uniform(p[p.add("x", Shape{2, 12})].value, r); },
               [](Graph& g, ParameterSet& p) {
                 return loss_against(g, g.transpose_last2(g.reshape(g.param(p[0]), Shape{2, 3, 4})), 8);
               }});
  c.push_back({"add+scale",
               [](ParameterSet& p, Rng& r) {
                 fill_uniform(p[p.add("a", Shape{5})].value, r);
                 fill_uniform(p[p.add("b", Shape{5})].value, r);
               },
               [](Graph& g, ParameterSet& p) {
                 return loss_against(g, g.add(g.scale(g.param(p[0]), -1.7), g.param(p[1])), 9);
               }});
  return c;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string where;
  std::size_t checked = 0, skipped = 0;
  bool coverage = true;
  for (const LayerCase& lc : layer_cases()) {
    ParameterSet ps;
    Rng rng(derive_seed(11, std::hash<std::string>{}(lc.name) & 0xffff));
    lc.init(ps, rng);
    const auto r = check_gradients(ps, [&](Graph& g) { return lc.build(g, ps); }, kCoordsPerLayer, 12, kFdStep);
    std::size_t expected = 0;
    for (const auto& p : ps) expected += std::min(p.value.size(), kCoordsPerLayer);
    checked += r.checked;
    coverage = coverage && r.checked + r.skipped_kinks >= expected;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = lc.name + " " + r.worst;
    }
  }
  for (auto kind : {BBoxEncoderKind::kMlp, BBoxEncoderKind::kCnn}) {
    ModelConfig cfg;
    cfg.bbox_encoder = kind;
    Model m(cfg, 21);
    Rng rng(22);
    for (auto& p : m.params())
      if (p.value.rank() == 1 && !p.frozen) fill_uniform(p.value, rng, -0.1, 0.1);
    Tensor images(Shape{2, kImageChannels, 12, 12});
    fill_uniform(images, rng, -2.0, 2.0);
    BBoxTensor b0, b1;
    for (std::size_t k = 0; k < b0.values.size(); ++k) b0.values[k] = rng.uniform(0.05, 0.95);
    for (std::size_t k = 0; k < 3 * kBBoxFields; ++k) b1.values[k] = rng.uniform(0.05, 0.95);
    const Tensor pos = stack_positions({{0.1, 0.6}, {0.8, 0.3}});
    const Tensor boxes = stack_bboxes({&b0, &b1});
    const Tensor tpl(Shape{2, 1}, {1.0, -1.0}), tsh(Shape{2, 1}, {0.5, 2.0});
    const auto r = check_gradients(m.params(), [&](Graph& g) {
      const auto h = m.forward(g, g.input(images), g.input(pos), g.input(boxes));
      return composite_loss(g, h.pl, h.sh, g.input(tpl), g.input(tsh), 0.5, 0.5);
    }, kCoordsPerLayer, 23, kFdStep);
    std::size_t expected = 0;
    for (const auto& p : m.params())
      if (!p.frozen) expected += std::min(p.value.size(), kCoordsPerLayer);
    coverage = coverage && r.checked + r.skipped_kinks >= expected && r.checked * 10 >= expected * 9;
    checked += r.checked;
    skipped += r.skipped_kinks;
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      where = to_string(kind) + " model " + r.worst;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst < kGradRelTol && coverage && secs < 60.0;
  o.detail = "max rel error " + fmt("%.3g", worst) + " over " + std::to_string(checked) + " coordinates (" +
             std::to_string(skipped) + " redrawn at ReLU kinks), " + fmt("%.1f", secs) + " s";
  if (!o.pass) o.detail += "; worst " + where;
  return o;
}

// ------------------------------------------------------------------ 2

Outcome criterion2() {
  Rng rng(31);
  const PathLossParams pl;
  double worst_rt = 0.0, worst_id = 0.0, worst_err = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double d = std::exp(rng.uniform(std::log(pl.min_distance), std::log(1e5)));
    worst_rt = std::max(worst_rt, std::abs(invert_distance(pl, path_loss(pl, d)) - d) / d);
    const double p = path_loss(pl, d), sh = rng.uniform(-70.0, -30.0);
    const double rssi = compose_rssi(p, sh);
    worst_id = std::max(worst_id, std::abs(sh_proxy_ground_truth(rssi, p) - sh));
    worst_id = std::max(worst_id, std::abs(compose_rssi(p, sh_proxy_ground_truth(rssi, p)) - rssi));
    const double ppl = p + rng.normal(), psh = sh + 3.0 * rng.normal();
    const double e_rssi = compose_rssi(ppl, psh) - rssi;
    worst_err = std::max(worst_err, std::abs(e_rssi - (-(ppl - p) + (psh - sh))));
  }
  // identities along the generated link budget too
  for (const auto& s : simulate_samples(SimConfig{}, 200, 32)) {
    worst_id = std::max(worst_id, std::abs(s.truth.rssi_db - compose_rssi(s.truth.pl_db, s.truth.sh_db)));
    worst_id = std::max(worst_id, std::abs(beam_power_to_rssi(s.truth.beam_powers) - s.truth.rssi_db));
  }
  Outcome o;
  o.pass = worst_rt < kRoundTripRelTol && worst_id < kIdentityTolDb * 1e3 && worst_err < kIdentityTolDb;
  o.detail = "distance round trip max rel " + fmt("%.2e", worst_rt) + ", compose/proxy max " + fmt("%.2e", worst_id) +
             " dB, e_rssi vs -e_pl+e_sh max " + fmt("%.2e", worst_err) + " dB";
  return o;
}

// ------------------------------------------------------------------ 3

Outcome criterion3() {
  Rng rng(41);
  double worst = 0.0;
  bool tol_exact = true;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(500);
    std::vector<double> pred(n), truth(n);
    long double sq = 0.0L, ab = 0.0L;
    std::size_t within = 0;
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = rng.uniform(-100.0, -30.0);
      pred[i] = truth[i] + rng.uniform(0.1, 6.0) * rng.normal();
      const long double e = static_cast<long double>(pred[i]) - truth[i];
      sq += e * e;
      ab += std::fabs(e);
      if (std::fabs(pred[i] - truth[i]) <= 1.0) ++within;
    }
    const ComponentMetrics m = component_metrics(pred, truth);
    worst = std::max(worst, std::abs(m.rmse - static_cast<double>(std::sqrt(sq / n))));
    worst = std::max(worst, std::abs(m.mae - static_cast<double>(ab / n)));
    tol_exact = tol_exact && m.tol_1db == 100.0 * static_cast<double>(within) / static_cast<double>(n);
  }
  const std::vector<double> t{0.0, 0.0, 0.0}, p{0.0, 1.0, 2.0};
  const ComponentMetrics hand = component_metrics(p, t);
  const bool hand_ok = hand.mae == 1.0 && std::abs(hand.rmse - std::sqrt(5.0 / 3.0)) < 1e-15 &&
                       std::abs(hand.rmse - 1.2910) < 5e-5 && std::abs(hand.tol_1db - 200.0 / 3.0) < 1e-12;
  Outcome o;
  o.pass = worst < kMetricOracleTol && tol_exact && hand_ok;
  o.detail = "max deviation from scalar oracle " + fmt("%.2e", worst) + "; (0,1,2) errors give MAE " +
             fmt("%.4f", hand.mae) + ", RMSE " + fmt("%.4f", hand.rmse) + ", tol " + fmt("%.2f", hand.tol_1db) + "%";
  return o;
}

// ------------------------------------------------------------------ 4, 5, 7

struct LearningRun {
  PreparedDataset data;
  std::vector<LinkTruth> truth;
  Model model;
  MetricsReport stage1_test, stage2_test;
  TrainReport stage1, stage2;
  double seconds = 0.0;
};

LearningRun& learning_run() {
  static LearningRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    LearningRun r{PreparedDataset{}, {}, Model(ModelConfig{}, derive_seed(4, 1)), {}, {}, {}, {}, 0.0};
    std::vector<Sample> samples;
    for (auto& s : simulate_samples(SimConfig{}, kLearnSamples, 4)) {
      samples.push_back(std::move(s.sample));
      r.truth.push_back(std::move(s.truth));
    }
    r.data = prepare(std::move(samples), derive_seed(4, 2));
    StageConfig s1 = StageConfig::stage1(), s2 = StageConfig::stage2();
    s1.epochs = s2.epochs = kLearnEpochs;
    r.model.set_target_scaling(fit_target_scaling(r.data));
    const auto& test = r.data.split.test;
    const auto gt = ground_truth(r.data.samples, test);
    r.stage1 = train_stage(r.model, r.data, s1, derive_seed(4, 3));
    r.stage1_test = compute_metrics(predict_samples(r.model, r.data, test), gt);
    r.stage2 = train_stage(r.model, r.data, s2, derive_seed(4, 4));
    r.stage2_test = compute_metrics(predict_samples(r.model, r.data, test), gt);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

// Least squares of RSSI on (1, log10 d, occluders per class), fitted on train, scored on test.
double noise_floor(const LearningRun& r) {
  auto features = [&](std::size_t i) {
    Eigen::VectorXd f(5);
    const LinkTruth& t = r.truth[i];
    f << 1.0, std::log10(r.data.samples[i].distance_m), t.occluders_per_class[kCarClass],
        t.occluders_per_class[kPedestrianClass], t.occluders_per_class[kSignClass];
    return f;
  };
  const auto& train = r.data.split.train;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), 5);
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t k = 0; k < train.size(); ++k) {
    X.row(static_cast<Eigen::Index>(k)) = features(train[k]).transpose();
    y[static_cast<Eigen::Index>(k)] = r.data.samples[train[k]].gt_rssi;
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  double sq = 0.0;
  for (std::size_t i : r.data.split.test) {
    const double e = features(i).dot(beta) - r.data.samples[i].gt_rssi;
    sq += e * e;
  }
  return std::sqrt(sq / static_cast<double>(r.data.split.test.size()));
}

Outcome criterion4() {
  LearningRun& r = learning_run();
  const double floor = noise_floor(r);
  const double sigma = SimConfig{}.occlusion.sigma_sh_db;
  const bool floor_ok = std::abs(floor - sigma) <= kNoiseFloorRelTol * sigma;
  const double s1 = r.stage1_test.rssi.rmse, s2 = r.stage2_test.rssi.rmse;
  const double ratio = r.stage1.epochs.front().train.total / r.stage1.epochs.back().train.total;
  Outcome o;
  o.pass = floor_ok && s2 <= kRssiRmseMaxDb && r.stage2_test.pl.rmse <= kPlRmseMaxDb && s2 <= s1 &&
           r.seconds < 15 * 60.0;
  o.detail = "test RMSE stage 1 rssi " + fmt("%.3f", s1) + " pl " + fmt("%.3f", r.stage1_test.pl.rmse) + " sh " +
             fmt("%.3f", r.stage1_test.sh.rmse) + "; stage 2 rssi " + fmt("%.3f", s2) + " (max " +
             fmt("%.1f", kRssiRmseMaxDb) + ") pl " + fmt("%.3f", r.stage2_test.pl.rmse) + " (max " +
             fmt("%.1f", kPlRmseMaxDb) + ") sh " + fmt("%.3f", r.stage2_test.sh.rmse) +
             "; linear oracle noise floor " + fmt("%.3f", floor) + " dB (sigma_sh " + fmt("%.1f", sigma) +
             "); stage-1 train loss ratio epoch 1/" + std::to_string(r.stage1.epochs.size()) + " " +
             fmt("%.1f", ratio) + "x; " + fmt("%.0f", r.seconds) + " s";
  return o;
}

Outcome criterion5() {
  LearningRun& r = learning_run();
  const InterferenceResult ir = interference_experiment(r.model, r.data, r.data.split.test);
  const double delta = ir.tx_only.rssi.rmse - ir.full.rssi.rmse;
  const std::string full_csv = metrics_csv(ir.full), tx_csv = metrics_csv(ir.tx_only);
  const auto pl_row = [](const std::string& csv) {
    const auto a = csv.find("\npl,") + 1;
    return csv.substr(a, csv.find('\n', a) - a);
  };
  const bool pl_identical =
      pl_row(full_csv) == pl_row(tx_csv) && histogram_csv(ir.full.pl) == histogram_csv(ir.tx_only.pl);
  Outcome o;
  o.pass = std::abs(delta) < kInterferenceRatio * ir.full.rssi.rmse && pl_identical;
  o.detail = "rssi RMSE full " + fmt("%.3f", ir.full.rssi.rmse) + ", Tx-only " + fmt("%.3f", ir.tx_only.rssi.rmse) +
             ", |delta| " + fmt("%.3f", std::abs(delta)) + " (limit " +
             fmt("%.3f", kInterferenceRatio * ir.full.rssi.rmse) + "); PL report " +
             (pl_identical ? "bit-identical" : "DIFFERS");
  return o;
}

// ------------------------------------------------------------------ 6

Outcome criterion6() {
  const auto t0 = std::chrono::steady_clock::now();
  SimConfig cfg;
  cfg.occlusion.sign_db = kAblationSignDb;
  double with_sum = 0.0, without_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed : {61, 62, 63}) {
    auto build = [&](std::optional<int> drop) {
      std::vector<Sample> samples;
      for (auto& s : simulate_samples(cfg, kAblationSamples, seed, drop)) samples.push_back(std::move(s.sample));
      return prepare(std::move(samples), derive_seed(seed, 2));
    };
    const PreparedDataset with = build(std::nullopt), without = build(kSignClass);
    StageConfig s1 = StageConfig::stage1();
    s1.epochs = kLearnEpochs;
    auto train = [&](const PreparedDataset& d) {
      Model m(ModelConfig{}, derive_seed(seed, 1));
      m.set_target_scaling(fit_target_scaling(d));
      train_stage(m, d, s1, derive_seed(seed, 3));
      return m;
    };
    const Model mw = train(with), mo = train(without);
    const AblationResult ab = bbox_ablation(mw, with, mo, without, kSignClass);
    with_sum += ab.with_class.sh.rmse;
    without_sum += ab.without_class.sh.rmse;
    per_seed += " " + fmt("%.3f", ab.with_class.sh.rmse) + "/" + fmt("%.3f", ab.without_class.sh.rmse);
  }
  Outcome o;
  o.pass = with_sum <= without_sum;
  o.detail = "mean SH RMSE with sign boxes " + fmt("%.3f", with_sum / 3.0) + ", without " +
             fmt("%.3f", without_sum / 3.0) + " (per seed with/without:" + per_seed + "); stage-1 runs, " +
             fmt("%.0f", seconds_since(t0)) + " s";
  return o;
}

// ------------------------------------------------------------------ 7

Outcome criterion7() {
  std::size_t worst = 0;
  for (auto kind : {BBoxEncoderKind::kMlp, BBoxEncoderKind::kCnn}) {
    ModelConfig cfg;
    cfg.bbox_encoder = kind;
    worst = std::max(worst, Model(cfg).trainable_parameter_count());
  }
  LearningRun& r = learning_run();
  const fs::path path = fs::temp_directory_path() / "visrssi_acceptance_ckpt.bin";
  save_parameters(path, r.model.params());
  Model loaded(ModelConfig{}, 12345);
  load_parameters(path, loaded.params());
  fs::remove(path);
  const auto& val = r.data.split.val;
  const double before = evaluate_loss(r.model, r.data, val, 0.5, 0.5).total;
  const double after = evaluate_loss(loaded, r.data, val, 0.5, 0.5).total;
  Outcome o;
  o.pass = static_cast<double>(worst) < kParamBudget && before == after && after == r.stage2.best_val_total;
  o.detail = "trainable parameters " + std::to_string(worst) + " (budget 2.6M); validation loss " +
             fmt("%.17g", before) + " before save, " + fmt("%.17g", after) + " after load";
  return o;
}

// ------------------------------------------------------------------ 8

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome criterion8() {
  const fs::path root = fs::temp_directory_path() / "visrssi_acceptance_determinism";
  fs::remove_all(root);
  const std::string cli = VISRSSI_CLI_PATH;
  for (const char* run : {"a", "b"}) {
    const fs::path dir = root / run;
    fs::create_directories(dir);
    const std::string cd = "cd " + dir.string() + " && " + cli;
    const int rc = shell(cd + " generate --out data --count 60 --seed 8 > log.txt") |
                   shell(cd + " train --data data --out ckpt --epochs1 3 --epochs2 2 --seed 8 >> log.txt") |
                   shell(cd + " eval --data data --ckpt ckpt --out eval --interference-experiment >> log.txt");
    if (rc != 0) return {false, std::string("pipeline run ") + run + " failed"};
  }
  std::size_t files = 0, bins = 0, csvs = 0;
  std::string first_diff;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    if (rel == "log.txt") continue;
    ++files;
    bins += e.path().extension() == ".bin";
    csvs += e.path().extension() == ".csv";
    if (slurp(e.path()) != slurp(root / "b" / rel) && first_diff.empty()) first_diff = rel.string();
  }
  fs::remove_all(root);
  Outcome o;
  o.pass = first_diff.empty() && bins >= 3 && csvs >= 10;
  o.detail = std::to_string(files) + " files compared (" + std::to_string(bins) + " checkpoints, " +
             std::to_string(csvs) + " CSVs)" + (first_diff.empty() ? ", all byte-identical" : ", first difference " + first_diff);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"gradient correctness", criterion1}, {"physics identities", criterion2},
      {"metric oracle", criterion3},        {"desk-scale learning", criterion4},
      {"interference robustness", criterion5}, {"bbox ablation", criterion6},
      {"parameter budget and checkpoint", criterion7}, {"determinism", criterion8}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("criterion %d %s: %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[k].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
