// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "visrssi_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run(const std::string& args, std::string* stdout_text = nullptr) {
  const fs::path log = work_dir() / "stdout.txt";
  const std::string cmd = std::string(VISRSSI_CLI_PATH) + " " + args + " > " + log.string() + " 2> " +
                          (work_dir() / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  if (stdout_text) {
    std::ifstream f(log);
    std::stringstream ss;
    ss << f.rdbuf();
    *stdout_text = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::map<std::string, double> key_values(const std::string& text) {
  std::map<std::string, double> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  return kv;
}

const fs::path& dataset() {
  static const fs::path d = [] {
    const fs::path p = work_dir() / "data";
    REQUIRE(run("generate --out " + p.string() + " --count 24 --seed 5") == 0);
    return p;
  }();
  return d;
}

const fs::path& checkpoint() {
  static const fs::path c = [] {
    const fs::path p = work_dir() / "ckpt";
    REQUIRE(run("train --data " + dataset().string() + " --out " + p.string() +
                " --epochs1 2 --epochs2 1 --batch1 8 --batch2 8 --seed 3") == 0);
    return p;
  }();
  return c;
}

}  // namespace

TEST_CASE("help exits 0 on every command") {
  CHECK(run("--help") == 0);
  for (const char* cmd : {"generate", "train", "eval", "predict", "param-count"}) CHECK(run(std::string(cmd) + " --help") == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("bogus") == 2);
  CHECK(run("generate --out x --no-such-flag") == 2);
  CHECK(run("generate") == 2);
  CHECK(run("train --data a --out b --bbox-encoder lstm") == 2);
  CHECK(run("eval --data a --ckpt b --out c --split holdout") == 2);
  CHECK(run("generate --out x --count many") == 2);
}

TEST_CASE("runtime failures exit 1") {
  CHECK(run("generate --out " + (work_dir() / "zero").string() + " --count 0") == 1);
  CHECK(run("train --data " + (work_dir() / "missing").string() + " --out " + (work_dir() / "o").string()) == 1);
  CHECK(run("eval --data " + dataset().string() + " --ckpt " + (work_dir() / "missing").string() + " --out " +
            (work_dir() / "o").string()) == 1);
}

TEST_CASE("generate is byte-reproducible") {
  const fs::path again = work_dir() / "data_again";
  REQUIRE(run("generate --out " + again.string() + " --count 24 --seed 5") == 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(dataset())) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dataset());
    CHECK_MESSAGE(slurp(e.path()) == slurp(again / rel), rel.string());
    ++files;
  }
  CHECK(files >= 24 * 3 + 2);
  CHECK(fs::exists(dataset() / "config.txt"));
}

TEST_CASE("train writes a self-describing checkpoint") {
  for (const char* f : {"config.txt", "model_config.txt", "norm_stats.txt", "split.csv", "model.bin", "stage1_best.bin",
                        "stage2_best.bin", "stage1_report.csv", "stage2_report.csv", "metrics.csv", "hist_rssi.csv"})
    CHECK_MESSAGE(fs::exists(checkpoint() / f), f);
  CHECK(slurp(checkpoint() / "config.txt").find("stage1.epochs=2") != std::string::npos);
}

TEST_CASE("zero-epoch training runs end to end") {
  const fs::path out = work_dir() / "ckpt0";
  CHECK(run("train --data " + dataset().string() + " --out " + out.string() + " --epochs1 0 --epochs2 0") == 0);
  CHECK(fs::exists(out / "model.bin"));
}

TEST_CASE("oracle evaluation reports zero error") {
  const fs::path out = work_dir() / "eval_oracle";
  REQUIRE(run("eval --data " + dataset().string() + " --ckpt " + checkpoint().string() + " --out " + out.string() +
              " --oracle --split all") == 0);
  std::stringstream ss(slurp(out / "metrics.csv"));
  std::string line;
  std::getline(ss, line);
  int rows = 0;
  while (std::getline(ss, line)) {
    const auto cells = split_csv_line(line);
    REQUIRE(cells.size() == 4);
    CHECK(std::stod(cells[1]) == 0.0);
    CHECK(std::stod(cells[2]) == 0.0);
    CHECK(std::stod(cells[3]) == 100.0);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("interference evaluation writes both arms") {
  const fs::path out = work_dir() / "eval_interf";
  REQUIRE(run("eval --data " + dataset().string() + " --ckpt " + checkpoint().string() + " --out " + out.string() +
              " --interference-experiment") == 0);
  CHECK(slurp(out / "full_hist_pl.csv") == slurp(out / "txonly_hist_pl.csv"));
  const auto full = split_csv_line(slurp(out / "full_metrics.csv").substr(slurp(out / "full_metrics.csv").find("\npl,") + 1));
  const auto tx = split_csv_line(slurp(out / "txonly_metrics.csv").substr(slurp(out / "txonly_metrics.csv").find("\npl,") + 1));
  CHECK(full[1] == tx[1]);
}

TEST_CASE("predict matches eval on the same sample") {
  const fs::path out = work_dir() / "eval_test";
  REQUIRE(run("eval --data " + dataset().string() + " --ckpt " + checkpoint().string() + " --out " + out.string()) == 0);
  std::stringstream preds(slurp(out / "predictions.csv"));
  std::string line;
  std::getline(preds, line);
  REQUIRE(std::getline(preds, line));
  const auto row = split_csv_line(line);
  const std::string id = row[0], stem = id.substr(1);

  std::stringstream manifest(slurp(dataset() / "manifest.csv"));
  std::getline(manifest, line);
  const auto header = split_csv_line(line);
  std::vector<std::string> m;
  while (std::getline(manifest, line)) {
    m = split_csv_line(line);
    if (m[0] == id) break;
  }
  REQUIRE(m[0] == id);
  std::map<std::string, std::string> col;
  for (std::size_t k = 0; k < header.size(); ++k) col[header[k]] = m[k];

  std::string printed;
  REQUIRE(run("predict --ckpt " + checkpoint().string() + " --image " + (dataset() / col["image_path"]).string() +
                  " --rx " + col["rx_lat"] + "," + col["rx_lon"] + " --tx " + col["tx_lat"] + "," + col["tx_lon"] +
                  " --bboxes " + (dataset() / col["bbox_path"]).string(),
              &printed) == 0);
  const auto kv = key_values(printed);
  CHECK(std::abs(kv.at("pl_db") - std::stod(row[1])) <= 5e-7);
  CHECK(std::abs(kv.at("sh_db") - std::stod(row[2])) <= 5e-7);
  CHECK(std::abs(kv.at("rssi_db") - std::stod(row[3])) <= 5e-7);
  CHECK(std::abs(kv.at("rssi_db") - (-kv.at("pl_db") + kv.at("sh_db"))) <= 1.5e-6);

  const fs::path no_tx = work_dir() / "no_tx.txt";
  std::ofstream(no_tx) << "1 0.5 0.5 0.1 0.1\n";
  CHECK(run("predict --ckpt " + checkpoint().string() + " --image " + (dataset() / col["image_path"]).string() +
            " --rx " + col["rx_lat"] + "," + col["rx_lon"] + " --tx " + col["tx_lat"] + "," + col["tx_lon"] +
            " --bboxes " + no_tx.string()) == 1);
  CHECK(run("predict --ckpt " + checkpoint().string() + " --image " + (dataset() / col["image_path"]).string() +
            " --rx nowhere --tx 1,2 --bboxes " + no_tx.string()) == 1);
}

TEST_CASE("param-count stays under budget") {
  std::string text;
  REQUIRE(run("param-count --bbox-encoder cnn", &text) == 0);
  const auto kv = key_values(text);
  CHECK(kv.at("trainable") < 2.6e6);
  CHECK(kv.at("trainable") == kv.at("parameters") - 4);
}
