// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "visrssi/dataset.hpp"
#include "visrssi/errors.hpp"
#include "visrssi/evaluation.hpp"
#include "visrssi/model.hpp"
#include "visrssi/physics.hpp"
#include "visrssi/rng.hpp"
#include "visrssi/scene_sim.hpp"
#include "visrssi/serialize.hpp"
#include "visrssi/training.hpp"

namespace py = pybind11;
using namespace visrssi;

namespace {

py::dict to_dict(const ComponentMetrics& m) {
  py::dict d;
  d["rmse"] = m.rmse;
  d["mae"] = m.mae;
  d["tol_1db"] = m.tol_1db;
  d["histogram"] = m.histogram;
  return d;
}

py::dict to_dict(const MetricsReport& r) {
  py::dict d;
  d["count"] = r.count;
  d["pl"] = to_dict(r.pl);
  d["sh"] = to_dict(r.sh);
  d["rssi"] = to_dict(r.rssi);
  return d;
}

py::dict to_dict(const TrainReport& r) {
  py::list train, val;
  for (const auto& e : r.epochs) {
    train.append(e.train.total);
    val.append(e.val.total);
  }
  py::dict d;
  d["best_epoch"] = r.best_epoch;
  d["best_val_total"] = r.best_val_total;
  d["train_total"] = train;
  d["val_total"] = val;
  return d;
}

const std::vector<std::size_t>& pick_split(const PreparedDataset& d, const std::string& split) {
  if (split == "train") return d.split.train;
  if (split == "val") return d.split.val;
  if (split == "test") return d.split.test;
  throw py::value_error("split must be train, val or test");
}

StageConfig stage(StageConfig c, std::size_t epochs, std::optional<std::size_t> batch) {
  c.epochs = epochs;
  if (batch) c.batch_size = *batch;
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Path-loss / shadowing decomposed RSSI prediction";
  py::register_exception<Error>(m, "VisrssiError", PyExc_RuntimeError);

  m.def(
      "path_loss", [](double d, double n) { return path_loss(PathLossParams{n, 1.0}, d); }, py::arg("distance_m"),
      py::arg("exponent") = 2.0);
  m.def(
      "invert_distance", [](double pl, double n) { return invert_distance(PathLossParams{n, 1.0}, pl); },
      py::arg("pl_db"), py::arg("exponent") = 2.0);
  m.def("compose_rssi", &compose_rssi, py::arg("pl_db"), py::arg("sh_db"));
  m.def("sh_proxy_ground_truth", &sh_proxy_ground_truth, py::arg("rssi_db"), py::arg("pl_db"));
  m.def(
      "component_metrics",
      [](const std::vector<double>& pred, const std::vector<double>& truth) {
        return to_dict(component_metrics(pred, truth));
      },
      py::arg("predicted"), py::arg("truth"));

  py::class_<PreparedDataset>(m, "Dataset")
      .def("__len__", [](const PreparedDataset& d) { return d.samples.size(); })
      .def("indices", &pick_split, py::arg("split"))
      .def_property_readonly("ids", [](const PreparedDataset& d) {
        std::vector<std::string> ids;
        for (const auto& s : d.samples) ids.push_back(s.id);
        return ids;
      });

  m.def(
      "simulate",
      [](std::size_t count, std::uint64_t seed, std::optional<int> drop_class, double sign_db) {
        SimConfig cfg;
        cfg.occlusion.sign_db = sign_db;
        std::vector<Sample> samples;
        for (auto& s : simulate_samples(cfg, count, seed, drop_class)) samples.push_back(std::move(s.sample));
        return prepare(std::move(samples), derive_seed(seed, 2));
      },
      py::arg("count"), py::arg("seed") = 0, py::arg("drop_class") = py::none(), py::arg("sign_db") = 2.0,
      "Simulate scenes in memory and split/normalize them.");
  m.def(
      "generate_dataset",
      [](const std::filesystem::path& root, std::size_t count, std::uint64_t seed) {
        generate_dataset(root, count, SimConfig{}, seed);
      },
      py::arg("root"), py::arg("count"), py::arg("seed") = 0);
  m.def(
      "load_dataset",
      [](const std::filesystem::path& root, std::uint64_t split_seed, std::optional<int> drop_class) {
        IngestOptions o;
        o.drop_class = drop_class;
        return prepare(load_samples(root, o), split_seed);
      },
      py::arg("root"), py::arg("split_seed") = 0, py::arg("drop_class") = py::none());

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& bbox_encoder, std::uint64_t seed) {
             ModelConfig c;
             c.bbox_encoder = parse_bbox_encoder(bbox_encoder);
             return Model(c, seed);
           }),
           py::arg("bbox_encoder") = "mlp", py::arg("seed") = 0)
      .def("parameter_count", [](const Model& md) { return md.params().scalar_count(false); })
      .def("trainable_parameter_count", &Model::trainable_parameter_count)
      .def("save", [](const Model& md, const std::filesystem::path& p) { save_parameters(p, md.params()); })
      .def("load", [](Model& md, const std::filesystem::path& p) { load_parameters(p, md.params()); })
      .def(
          "predict",
          [](const Model& md, const PreparedDataset& d, const std::string& split) {
            py::list out;
            for (const Prediction& p : predict_samples(md, d, pick_split(d, split)))
              out.append(py::make_tuple(p.pl, p.sh, p.rssi));
            return out;
          },
          py::arg("data"), py::arg("split") = "test", "List of (pl_db, sh_db, rssi_db) per sample.");

  m.def(
      "train",
      [](Model& md, const PreparedDataset& d, std::size_t epochs1, std::size_t epochs2, std::uint64_t seed,
         std::optional<std::size_t> batch1, std::optional<std::size_t> batch2) {
        TwoStageReport r;
        {
          py::gil_scoped_release release;
          r = train_two_stage(md, d, stage(StageConfig::stage1(), epochs1, batch1),
                              stage(StageConfig::stage2(), epochs2, batch2), seed);
        }
        py::dict out;
        out["stage1"] = to_dict(r.stage1);
        out["stage2"] = to_dict(r.stage2);
        return out;
      },
      py::arg("model"), py::arg("data"), py::arg("epochs1") = 30, py::arg("epochs2") = 30, py::arg("seed") = 0,
      py::arg("batch1") = py::none(), py::arg("batch2") = py::none());
  m.def(
      "evaluate",
      [](const Model& md, const PreparedDataset& d, const std::string& split) {
        const auto& idx = pick_split(d, split);
        return to_dict(compute_metrics(predict_samples(md, d, idx), ground_truth(d.samples, idx)));
      },
      py::arg("model"), py::arg("data"), py::arg("split") = "test");
  m.def(
      "interference_experiment",
      [](const Model& md, const PreparedDataset& d, const std::string& split) {
        const InterferenceResult r = interference_experiment(md, d, pick_split(d, split));
        py::dict out;
        out["full"] = to_dict(r.full);
        out["tx_only"] = to_dict(r.tx_only);
        out["rssi_rmse_increase"] = r.rssi_rmse_increase;
        return out;
      },
      py::arg("model"), py::arg("data"), py::arg("split") = "test");
}
