// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "visrssi/errors.hpp"
#include "visrssi/rng.hpp"

namespace visrssi {
namespace {

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw FormatError(std::string("invalid ") + what + ": '" + s + "'");
  }
  if (used != s.size()) throw FormatError(std::string("invalid ") + what + ": '" + s + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

void check_latlon(const LatLon& p) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0 || p.lon < -180.0 ||
      p.lon > 180.0)
    throw InvalidCoordinate("invalid coordinate (" + fmt(p.lat) + ", " + fmt(p.lon) + ")");
}

}  // namespace

double meters_per_degree_lat(double lat_deg) {
  const double phi = lat_deg * kDegToRad;
  return 111132.92 - 559.82 * std::cos(2.0 * phi) + 1.175 * std::cos(4.0 * phi) - 0.0023 * std::cos(6.0 * phi);
}

double meters_per_degree_lon(double lat_deg) {
  const double phi = lat_deg * kDegToRad;
  return 111412.84 * std::cos(phi) - 93.5 * std::cos(3.0 * phi) + 0.118 * std::cos(5.0 * phi);
}

LocalOffset geodetic_to_local(const LatLon& rx, const LatLon& tx) {
  check_latlon(rx);
  check_latlon(tx);
  const double mid = 0.5 * (rx.lat + tx.lat);
  LocalOffset o;
  o.east_m = (tx.lon - rx.lon) * meters_per_degree_lon(mid);
  o.north_m = (tx.lat - rx.lat) * meters_per_degree_lat(mid);
  o.distance_m = std::hypot(o.east_m, o.north_m);
  return o;
}

LatLon local_to_geodetic(const LatLon& rx, double east_m, double north_m) {
  check_latlon(rx);
  LatLon tx = rx;
  // Fixed point on the mid latitude; converges to rounding in a few steps for
  // any link shorter than a few tens of kilometers.
  for (int it = 0; it < 8; ++it) {
    const double mid = 0.5 * (rx.lat + tx.lat);
    tx.lat = rx.lat + north_m / meters_per_degree_lat(mid);
    tx.lon = rx.lon + east_m / meters_per_degree_lon(mid);
  }
  return tx;
}

std::vector<BoxAnnotation> parse_yolo(const std::string& text) {
  std::vector<BoxAnnotation> boxes;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    auto bad = [&](const std::string& why) {
      return MalformedBBoxLine("line " + std::to_string(lineno) + ": " + why + ": '" + line + "'");
    };
    if (tok.size() != 5) throw bad("expected 5 fields");
    BoxAnnotation b;
    const auto& c = tok[0];
    auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), b.class_id);
    if (ec != std::errc() || ptr != c.data() + c.size() || b.class_id < 0) throw bad("class must be a non-negative integer");
    double* fields[] = {&b.x_center, &b.y_center, &b.width, &b.height};
    for (int k = 0; k < 4; ++k) {
      try {
        *fields[k] = parse_double(tok[k + 1], "box field");
      } catch (const FormatError&) {
        throw bad("non-numeric field");
      }
      if (!std::isfinite(*fields[k]) || *fields[k] < 0.0 || *fields[k] > 1.0) throw bad("field outside [0,1]");
    }
    boxes.push_back(b);
  }
  return boxes;
}

std::string format_yolo(const std::vector<BoxAnnotation>& boxes) {
  std::string out;
  for (const auto& b : boxes) {
    out += std::to_string(b.class_id) + " " + fmt(b.x_center) + " " + fmt(b.y_center) + " " + fmt(b.width) + " " +
           fmt(b.height) + "\n";
  }
  return out;
}

BBoxTensor build_bbox_tensor(const std::vector<BoxAnnotation>& boxes, std::optional<int> drop_class) {
  std::optional<std::size_t> tx;
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].class_id == kTxClass && !tx) {
      tx = i;
    } else if (!drop_class || boxes[i].class_id != *drop_class) {
      others.push_back(i);
    }
  }
  if (!tx) throw MissingTxBox("no transmitter (class 0) box in annotation");
  std::stable_sort(others.begin(), others.end(),
                   [&](std::size_t a, std::size_t b) { return boxes[a].area() > boxes[b].area(); });
  BBoxTensor t;
  auto put = [&](std::size_t slot, const BoxAnnotation& b) {
    double* r = t.row(slot);
    r[0] = static_cast<double>(b.class_id);
    r[1] = b.x_center;
    r[2] = b.y_center;
    r[3] = b.width;
    r[4] = b.height;
  };
  put(0, boxes[*tx]);
  for (std::size_t k = 0; k < others.size() && k + 1 < kMaxBBox; ++k) put(k + 1, boxes[others[k]]);
  return t;
}

Manifest read_manifest(const std::filesystem::path& root) {
  const std::string text = read_text(root / "manifest.csv");
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty manifest");
  const auto header = split_csv_line(line);
  const std::vector<std::string> expected = {"sample_id", "image_path", "rx_lat",    "rx_lon",
                                             "tx_lat",    "tx_lon",     "bbox_path", "beam_path"};
  if (header != expected) throw FormatError("unexpected manifest header: " + line);
  Manifest m;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != expected.size()) throw FormatError("manifest row has " + std::to_string(f.size()) + " fields");
    ManifestRow r;
    r.sample_id = f[0];
    r.image_path = f[1];
    r.rx = {parse_double(f[2], "rx_lat"), parse_double(f[3], "rx_lon")};
    r.tx = {parse_double(f[4], "tx_lat"), parse_double(f[5], "tx_lon")};
    r.bbox_path = f[6];
    r.beam_path = f[7];
    for (const auto& existing : m.rows)
      if (existing.sample_id == r.sample_id) throw FormatError("duplicate sample id " + r.sample_id);
    m.rows.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const std::filesystem::path& root, const Manifest& manifest) {
  std::ofstream f(root / "manifest.csv", std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write manifest in " + root.string());
  f << "sample_id,image_path,rx_lat,rx_lon,tx_lat,tx_lon,bbox_path,beam_path\n";
  for (const auto& r : manifest.rows) {
    f << r.sample_id << ',' << r.image_path << ',' << fmt(r.rx.lat) << ',' << fmt(r.rx.lon) << ',' << fmt(r.tx.lat)
      << ',' << fmt(r.tx.lon) << ',' << r.bbox_path << ',' << r.beam_path << '\n';
  }
  if (!f) throw IoError("failed writing manifest");
}

std::vector<double> parse_beams(const std::string& text) {
  std::istringstream is(text);
  std::vector<double> beams;
  for (std::string tok; is >> tok;) beams.push_back(parse_double(tok, "beam power"));
  if (beams.size() != kBeamCount)
    throw BeamCountMismatch("expected " + std::to_string(kBeamCount) + " beam powers, found " +
                            std::to_string(beams.size()));
  return beams;
}

std::string format_beams(const std::vector<double>& beams) {
  std::string out;
  for (std::size_t i = 0; i < beams.size(); ++i) {
    out += fmt(beams[i]);
    out += (i + 1 == beams.size()) ? '\n' : ' ';
  }
  return out;
}

std::string NormalizationStats::to_text() const {
  std::ostringstream os;
  os << "dx_min=" << fmt(dx_min) << "\ndx_max=" << fmt(dx_max) << "\ndy_min=" << fmt(dy_min)
     << "\ndy_max=" << fmt(dy_max) << "\n";
  for (int c = 0; c < 3; ++c)
    os << "mean" << c << "=" << fmt(channel_mean[c]) << "\nstd" << c << "=" << fmt(channel_std[c]) << "\n";
  return os.str();
}

NormalizationStats NormalizationStats::from_text(const std::string& text) {
  NormalizationStats s;
  std::istringstream is(text);
  std::string line;
  int seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad stats line: " + line);
    const std::string key = line.substr(0, eq);
    const double v = parse_double(line.substr(eq + 1), key.c_str());
    if (key == "dx_min") s.dx_min = v;
    else if (key == "dx_max") s.dx_max = v;
    else if (key == "dy_min") s.dy_min = v;
    else if (key == "dy_max") s.dy_max = v;
    else if (key.size() == 5 && key.starts_with("mean")) s.channel_mean.at(key[4] - '0') = v;
    else if (key.size() == 4 && key.starts_with("std")) s.channel_std.at(key[3] - '0') = v;
    else throw FormatError("unknown stats key: " + key);
    ++seen;
  }
  if (seen != 10) throw FormatError("incomplete normalization stats");
  return s;
}

Sample make_sample(std::string id, const RgbImage& frame, const LatLon& rx, const LatLon& tx,
                   const std::vector<BoxAnnotation>& boxes, const std::vector<double>& beams,
                   const IngestOptions& options) {
  Sample s;
  s.id = std::move(id);
  s.image = (frame.width == kImageSize && frame.height == kImageSize) ? frame
                                                                      : resize_bilinear(frame, kImageSize, kImageSize);
  const LocalOffset off = geodetic_to_local(rx, tx);
  s.east_m = off.east_m;
  s.north_m = off.north_m;
  s.distance_m = off.distance_m;
  s.bboxes = build_bbox_tensor(boxes, options.drop_class);
  if (beams.size() != kBeamCount)
    throw BeamCountMismatch("expected " + std::to_string(kBeamCount) + " beam powers, found " +
                            std::to_string(beams.size()));
  s.gt_rssi = beam_power_to_rssi(beams);
  s.gt_pl = path_loss(options.path_loss, s.distance_m);
  s.gt_sh = sh_proxy_ground_truth(s.gt_rssi, s.gt_pl);
  return s;
}

Sample ingest(const std::filesystem::path& root, const ManifestRow& row, const IngestOptions& options) {
  const RgbImage frame = read_image(root / row.image_path);
  const auto boxes = parse_yolo(read_text(root / row.bbox_path));
  const auto beams = parse_beams(read_text(root / row.beam_path));
  return make_sample(row.sample_id, frame, row.rx, row.tx, boxes, beams, options);
}

NormalizationStats compute_stats(const std::vector<Sample>& samples, const std::vector<std::size_t>& train) {
  if (train.empty()) throw EmptySplit("cannot compute normalization statistics from an empty training split");
  NormalizationStats st;
  st.dx_min = st.dy_min = std::numeric_limits<double>::infinity();
  st.dx_max = st.dy_max = -std::numeric_limits<double>::infinity();
  std::array<double, 3> sum{}, sumsq{};
  double count = 0.0;
  for (std::size_t i : train) {
    const Sample& s = samples.at(i);
    st.dx_min = std::min(st.dx_min, s.east_m);
    st.dx_max = std::max(st.dx_max, s.east_m);
    st.dy_min = std::min(st.dy_min, s.north_m);
    st.dy_max = std::max(st.dy_max, s.north_m);
    std::array<double, 3> psum{}, psq{};
    for (std::size_t p = 0; p < s.image.width * s.image.height; ++p) {
      for (int c = 0; c < 3; ++c) {
        const double v = s.image.pixels[p * 3 + c] / 255.0;
        psum[c] += v;
        psq[c] += v * v;
      }
    }
    for (int c = 0; c < 3; ++c) {
      sum[c] += psum[c];
      sumsq[c] += psq[c];
    }
    count += static_cast<double>(s.image.width * s.image.height);
  }
  constexpr double kMinRangeM = 1e-6;
  if (!(st.dx_max - st.dx_min > kMinRangeM) || !(st.dy_max - st.dy_min > kMinRangeM))
    throw TooFewSamples("training split has a degenerate position range; min-max normalization undefined");
  for (int c = 0; c < 3; ++c) {
    st.channel_mean[c] = sum[c] / count;
    const double var = std::max(0.0, sumsq[c] / count - st.channel_mean[c] * st.channel_mean[c]);
    st.channel_std[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return st;
}

PositionInput normalize_position(double east_m, double north_m, const NormalizationStats& stats) {
  return {(east_m - stats.dx_min) / (stats.dx_max - stats.dx_min),
          (north_m - stats.dy_min) / (stats.dy_max - stats.dy_min)};
}

void apply_stats(Sample& sample, const NormalizationStats& stats) {
  sample.position = normalize_position(sample.east_m, sample.north_m, stats);
}

Sample preprocess(const std::filesystem::path& root, const ManifestRow& row, const NormalizationStats& stats,
                  const IngestOptions& options) {
  Sample s = ingest(root, row, options);
  apply_stats(s, stats);
  return s;
}

namespace {

void write_normalized(const RgbImage& image, const NormalizationStats& stats, double* out) {
  if (image.width != kImageSize || image.height != kImageSize) throw ShapeMismatch("sample image must be 224x224");
  const std::size_t plane = kImageSize * kImageSize;
  for (std::size_t p = 0; p < plane; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      out[c * plane + p] = (image.pixels[p * 3 + c] / 255.0 - stats.channel_mean[c]) / stats.channel_std[c];
}

}  // namespace

ImageInput image_input(const RgbImage& image, const NormalizationStats& stats) {
  ImageInput in;
  write_normalized(image, stats, in.pixels.data());
  return in;
}

Tensor image_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                   const NormalizationStats& stats) {
  const std::size_t per = kImageChannels * kImageSize * kImageSize;
  Tensor out(Shape{indices.size(), kImageChannels, kImageSize, kImageSize});
  for (std::size_t k = 0; k < indices.size(); ++k) write_normalized(samples.at(indices[k]).image, stats, out.data() + k * per);
  return out;
}

DatasetSplit split_indices(std::size_t n, std::uint64_t seed) {
  if (n < 10) throw TooFewSamples("need at least 10 samples to split, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x5b117));
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  DatasetSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

std::array<Manifest, 3> split(const Manifest& manifest, std::uint64_t seed) {
  const DatasetSplit s = split_indices(manifest.rows.size(), seed);
  std::array<Manifest, 3> out;
  const std::vector<std::size_t>* parts[] = {&s.train, &s.val, &s.test};
  for (int k = 0; k < 3; ++k)
    for (std::size_t i : *parts[k]) out[k].rows.push_back(manifest.rows[i]);
  return out;
}

std::string format_split(const DatasetSplit& split, const std::vector<Sample>& samples) {
  std::string out = "sample_id,split\n";
  const std::pair<const std::vector<std::size_t>*, const char*> parts[] = {
      {&split.train, "train"}, {&split.val, "val"}, {&split.test, "test"}};
  for (const auto& [idx, name] : parts)
    for (std::size_t i : *idx) out += samples.at(i).id + "," + name + "\n";
  return out;
}

DatasetSplit parse_split(const std::string& text, const std::vector<Sample>& samples) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < samples.size(); ++i) index.emplace(samples[i].id, i);
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "sample_id,split") throw FormatError("split file: bad header");
  DatasetSplit out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("split file: malformed line: " + line);
    const auto it = index.find(line.substr(0, comma));
    if (it == index.end()) throw FormatError("split file: unknown sample " + line.substr(0, comma));
    const std::string name = line.substr(comma + 1);
    if (name == "train") out.train.push_back(it->second);
    else if (name == "val") out.val.push_back(it->second);
    else if (name == "test") out.test.push_back(it->second);
    else throw FormatError("split file: unknown split " + name);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) { return read_text(path); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

PreparedDataset prepare(std::vector<Sample> samples, std::uint64_t split_seed) {
  PreparedDataset d;
  d.split = split_indices(samples.size(), split_seed);
  d.stats = compute_stats(samples, d.split.train);
  for (auto& s : samples) apply_stats(s, d.stats);
  d.samples = std::move(samples);
  return d;
}

std::vector<Sample> load_samples(const std::filesystem::path& root, const IngestOptions& options) {
  const Manifest m = read_manifest(root);
  std::vector<Sample> out;
  out.reserve(m.rows.size());
  for (const auto& row : m.rows) out.push_back(ingest(root, row, options));
  return out;
}

}  // namespace visrssi
