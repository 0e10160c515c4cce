// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// visrssi: generate | train | eval | predict | param-count

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "visrssi/dataset.hpp"
#include "visrssi/errors.hpp"
#include "visrssi/evaluation.hpp"
#include "visrssi/image.hpp"
#include "visrssi/model.hpp"
#include "visrssi/physics.hpp"
#include "visrssi/rng.hpp"
#include "visrssi/scene_sim.hpp"
#include "visrssi/serialize.hpp"
#include "visrssi/training.hpp"

namespace fs = std::filesystem;
using namespace visrssi;

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kSplitStream = 0x5911;
constexpr std::uint64_t kTrainStream = 0x7a19;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

LatLon parse_latlon(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw InvalidCoordinate("expected LAT,LON, got '" + text + "'");
  try {
    const double lat = std::stod(text.substr(0, comma));
    const double lon = std::stod(text.substr(comma + 1));
    return {lat, lon};
  } catch (const std::logic_error&) {
    throw InvalidCoordinate("expected LAT,LON, got '" + text + "'");
  }
}

std::optional<int> optional_class(int cls) { return cls < 0 ? std::nullopt : std::optional<int>(cls); }

struct GenerateArgs {
  std::string out;
  std::size_t count = 2000;
  std::uint64_t seed = 0;
  SimConfig sim;
};

int cmd_generate(const GenerateArgs& a) {
  if (a.count == 0) throw Error("--count must be >= 1");
  a.sim.validate();
  fs::create_directories(a.out);
  generate_dataset(a.out, a.count, a.sim, a.seed);
  std::ostringstream cfg;
  cfg << "command=generate\ncount=" << a.count << "\nseed=" << a.seed << "\n" << a.sim.to_text();
  write_text_file(fs::path(a.out) / "config.txt", cfg.str());
  std::cout << "wrote " << a.count << " samples to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string out;
  std::string bbox_encoder = "mlp";
  std::uint64_t seed = 0;
  int drop_class = -1;
  StageConfig stage1 = StageConfig::stage1();
  StageConfig stage2 = StageConfig::stage2();
};

IngestOptions ingest_options(int drop_class) {
  IngestOptions o;
  o.drop_class = optional_class(drop_class);
  return o;
}

int cmd_train(TrainArgs a) {
  a.stage1.validate();
  a.stage2.validate();
  ModelConfig mc;
  mc.bbox_encoder = parse_bbox_encoder(a.bbox_encoder);
  PreparedDataset data = prepare(load_samples(a.data, ingest_options(a.drop_class)), derive_seed(a.seed, kSplitStream));

  const fs::path out(a.out);
  fs::create_directories(out);
  std::ostringstream cfg;
  cfg << "command=train\ndata=" << a.data << "\nseed=" << a.seed << "\ndrop_class=" << a.drop_class << "\n"
      << mc.to_text() << a.stage1.to_text("stage1.") << a.stage2.to_text("stage2.");
  write_text_file(out / "config.txt", cfg.str());
  write_text_file(out / "model_config.txt", mc.to_text());
  write_text_file(out / "norm_stats.txt", data.stats.to_text());
  write_text_file(out / "split.csv", format_split(data.split, data.samples));

  Model model(mc, derive_seed(a.seed, kInitStream));
  const TwoStageReport r = train_two_stage(model, data, a.stage1, a.stage2, derive_seed(a.seed, kTrainStream), out);
  save_parameters(out / "model.bin", model.params());

  const MetricsReport m =
      compute_metrics(predict_samples(model, data, data.split.test), ground_truth(data.samples, data.split.test));
  write_reports(out, m);
  std::cout << "stage1 best epoch " << r.stage1.best_epoch << ", stage2 best epoch " << r.stage2.best_epoch << "\n"
            << "test rmse pl=" << fmt(m.pl.rmse) << " sh=" << fmt(m.sh.rmse) << " rssi=" << fmt(m.rssi.rmse) << "\n";
  return 0;
}

struct Checkpoint {
  Model model;
  NormalizationStats stats;
};

Checkpoint load_checkpoint(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("checkpoint directory not found: " + dir.string());
  Checkpoint c{Model(ModelConfig::from_text(read_text_file(dir / "model_config.txt"))),
               NormalizationStats::from_text(read_text_file(dir / "norm_stats.txt"))};
  load_parameters(dir / "model.bin", c.model.params());
  return c;
}

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string out;
  std::string split = "test";
  bool interference = false;
  bool oracle = false;
  int drop_class = -1;
};

int cmd_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  PreparedDataset data;
  data.samples = load_samples(a.data, ingest_options(a.drop_class));
  for (Sample& s : data.samples) apply_stats(s, ck.stats);
  data.stats = ck.stats;
  std::vector<std::size_t> indices;
  if (a.split == "all") {
    indices.resize(data.samples.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  } else {
    data.split = parse_split(read_text_file(fs::path(a.ckpt) / "split.csv"), data.samples);
    indices = a.split == "val" ? data.split.val : a.split == "train" ? data.split.train : data.split.test;
  }
  if (indices.empty()) throw EmptyInput("split '" + a.split + "' holds no samples");

  const auto truth = ground_truth(data.samples, indices);
  std::vector<Prediction> preds;
  if (a.oracle) {
    for (const auto& t : truth) preds.push_back({t.pl, t.sh, compose_rssi(t.pl, t.sh)});
  } else {
    preds = predict_samples(ck.model, data, indices);
  }
  for (const auto& p : preds)
    if (p.rssi != compose_rssi(p.pl, p.sh)) throw Error("prediction violates rssi = -pl + sh");

  const fs::path out(a.out);
  const MetricsReport m = compute_metrics(preds, truth);
  write_reports(out, m);
  std::string rows = "sample_id,pl_db,sh_db,rssi_db,gt_pl_db,gt_sh_db,gt_rssi_db\n";
  for (std::size_t k = 0; k < indices.size(); ++k) {
    rows += data.samples[indices[k]].id + "," + fmt(preds[k].pl) + "," + fmt(preds[k].sh) + "," + fmt(preds[k].rssi) +
            "," + fmt(truth[k].pl) + "," + fmt(truth[k].sh) + "," + fmt(truth[k].rssi) + "\n";
  }
  write_text_file(out / "predictions.csv", rows);
  std::ostringstream cfg;
  cfg << "command=eval\ndata=" << a.data << "\nckpt=" << a.ckpt << "\nsplit=" << a.split
      << "\ninterference_experiment=" << (a.interference ? "true" : "false") << "\noracle="
      << (a.oracle ? "true" : "false") << "\ndrop_class=" << a.drop_class << "\n";
  write_text_file(out / "config.txt", cfg.str());
  std::cout << metrics_csv(m);

  if (a.interference) {
    const InterferenceResult r = interference_experiment(ck.model, data, indices);
    write_reports(out, r.full, "full_");
    write_reports(out, r.tx_only, "txonly_");
    std::cout << "interference rssi rmse full=" << fmt(r.full.rssi.rmse) << " tx_only=" << fmt(r.tx_only.rssi.rmse)
              << " delta=" << fmt(r.rssi_rmse_increase) << "\n";
  }
  return 0;
}

struct PredictArgs {
  std::string ckpt;
  std::string image;
  std::string rx;
  std::string tx;
  std::string bboxes;
};

int cmd_predict(const PredictArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const RgbImage frame = read_image(a.image);
  const RgbImage img =
      (frame.width == kImageSize && frame.height == kImageSize) ? frame : resize_bilinear(frame, kImageSize, kImageSize);
  const LocalOffset off = geodetic_to_local(parse_latlon(a.rx), parse_latlon(a.tx));
  const BBoxTensor boxes = build_bbox_tensor(parse_yolo(read_text_file(a.bboxes)));
  const Prediction p = ck.model.predict(image_input(img, ck.stats), normalize_position(off.east_m, off.north_m, ck.stats),
                                        boxes);
  std::printf("pl_db=%.6f\nsh_db=%.6f\nrssi_db=%.6f\n", p.pl, p.sh, p.rssi);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vision-aided RSSI prediction: data generation, training, evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.count, "Number of samples")->capture_default_str();
  g->add_option("--seed", gen.seed, "Master seed")->capture_default_str();
  g->add_option("--sigma-sh", gen.sim.occlusion.sigma_sh_db, "Shadowing noise std (dB)")->capture_default_str();
  g->add_option("--max-distractors", gen.sim.max_distractors, "Distractors per scene")->capture_default_str();
  g->add_option("--min-distance", gen.sim.min_distance_m, "Minimum Tx distance (m)")->capture_default_str();
  g->add_option("--max-distance", gen.sim.max_distance_m, "Maximum Tx distance (m)")->capture_default_str();
  g->add_option("--car-db", gen.sim.occlusion.car_db, "Car attenuation (dB)")->capture_default_str();
  g->add_option("--pedestrian-db", gen.sim.occlusion.pedestrian_db, "Pedestrian attenuation (dB)")
      ->capture_default_str();
  g->add_option("--sign-db", gen.sim.occlusion.sign_db, "Sign attenuation (dB)")->capture_default_str();
  g->add_option("--corridor-fraction", gen.sim.corridor_fraction, "Share of distractors near the line of sight")
      ->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Two-stage training");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--out", tr.out, "Checkpoint directory")->required();
  t->add_option("--bbox-encoder", tr.bbox_encoder, "mlp or cnn")
      ->check(CLI::IsMember({"mlp", "cnn"}))
      ->capture_default_str();
  t->add_option("--seed", tr.seed, "Master seed")->capture_default_str();
  t->add_option("--drop-class", tr.drop_class, "Remove boxes of this class (-1 keeps all)")->capture_default_str();
  t->add_option("--epochs1", tr.stage1.epochs, "Stage 1 epochs")->capture_default_str();
  t->add_option("--epochs2", tr.stage2.epochs, "Stage 2 epochs")->capture_default_str();
  t->add_option("--batch1", tr.stage1.batch_size, "Stage 1 batch size")->capture_default_str();
  t->add_option("--batch2", tr.stage2.batch_size, "Stage 2 batch size")->capture_default_str();
  t->add_option("--lr1", tr.stage1.base_lr, "Stage 1 learning rate")->capture_default_str();
  t->add_option("--lr2", tr.stage2.base_lr, "Stage 2 learning rate")->capture_default_str();
  double lambda_pl = 0.5, lambda_sh = 0.5;
  t->add_option("--lambda-pl", lambda_pl, "Path-loss loss weight")->capture_default_str();
  t->add_option("--lambda-sh", lambda_sh, "Shadowing loss weight")->capture_default_str();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--ckpt", ev.ckpt, "Checkpoint directory")->required();
  e->add_option("--out", ev.out, "Report directory")->required();
  e->add_option("--split", ev.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  e->add_flag("--interference-experiment", ev.interference, "Also evaluate with Tx-only boxes");
  e->add_flag("--oracle", ev.oracle, "Echo ground truth instead of predicting");
  e->add_option("--drop-class", ev.drop_class, "Remove boxes of this class (-1 keeps all)")->capture_default_str();

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict one sample");
  p->add_option("--ckpt", pr.ckpt, "Checkpoint directory")->required();
  p->add_option("--image", pr.image, "Camera frame (PNG or PPM)")->required();
  p->add_option("--rx", pr.rx, "Receiver LAT,LON")->required();
  p->add_option("--tx", pr.tx, "Transmitter LAT,LON")->required();
  p->add_option("--bboxes", pr.bboxes, "YOLO annotation file")->required();

  std::string pc_encoder = "mlp";
  auto* pc = app.add_subcommand("param-count", "Print parameter counts");
  pc->add_option("--bbox-encoder", pc_encoder, "mlp or cnn")->check(CLI::IsMember({"mlp", "cnn"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) {
      tr.stage1.lambda_pl = tr.stage2.lambda_pl = lambda_pl;
      tr.stage1.lambda_sh = tr.stage2.lambda_sh = lambda_sh;
      return cmd_train(tr);
    }
    if (*e) return cmd_eval(ev);
    if (*p) return cmd_predict(pr);
    if (*pc) {
      ModelConfig mc;
      mc.bbox_encoder = parse_bbox_encoder(pc_encoder);
      Model m(mc);
      std::cout << "parameters=" << m.parameter_count() << "\ntrainable=" << m.trainable_parameter_count() << "\n";
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}
