// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk dataset layout and preprocessing.
//
//   <root>/manifest.csv   sample_id,image_path,rx_lat,rx_lon,tx_lat,tx_lon,bbox_path,beam_path
//   <root>/images/*.ppm   (or .png)
//   <root>/bboxes/*.txt   one YOLO line per object: class x_center y_center width height
//   <root>/beams/*.txt    64 whitespace-separated linear powers
//
// Paths in the manifest are relative to <root>.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "visrssi/image.hpp"
#include "visrssi/model.hpp"
#include "visrssi/physics.hpp"

namespace visrssi {

inline constexpr int kTxClass = 0;
inline constexpr int kCarClass = 1;
inline constexpr int kPedestrianClass = 2;
inline constexpr int kSignClass = 3;

struct LatLon {
  double lat = 0.0;  ///< degrees
  double lon = 0.0;  ///< degrees
};

/// East/North displacement of the transmitter relative to the receiver.
struct LocalOffset {
  double east_m = 0.0;
  double north_m = 0.0;
  double distance_m = 0.0;
};

double meters_per_degree_lat(double lat_deg);
double meters_per_degree_lon(double lat_deg);

/// Equirectangular tangent-plane conversion evaluated at the mid latitude, so
/// swapping the endpoints negates the offset exactly.
LocalOffset geodetic_to_local(const LatLon& rx, const LatLon& tx);
/// Inverse of geodetic_to_local for a fixed receiver.
LatLon local_to_geodetic(const LatLon& rx, double east_m, double north_m);

struct BoxAnnotation {
  int class_id = 0;
  double x_center = 0.0;
  double y_center = 0.0;
  double width = 0.0;
  double height = 0.0;

  double area() const { return width * height; }
  friend bool operator==(const BoxAnnotation&, const BoxAnnotation&) = default;
};

std::vector<BoxAnnotation> parse_yolo(const std::string& text);
std::string format_yolo(const std::vector<BoxAnnotation>& boxes);

/// Tx (first class-0 box) in slot 0, remaining boxes by descending area (ties
/// keep file order), truncated to the slot count, zero padding after.
/// Boxes whose class equals `drop_class` are discarded first.
BBoxTensor build_bbox_tensor(const std::vector<BoxAnnotation>& boxes, std::optional<int> drop_class = std::nullopt);

struct ManifestRow {
  std::string sample_id;
  std::string image_path;
  LatLon rx;
  LatLon tx;
  std::string bbox_path;
  std::string beam_path;
};

struct Manifest {
  std::vector<ManifestRow> rows;
};

Manifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const Manifest& manifest);

std::vector<double> parse_beams(const std::string& text);
std::string format_beams(const std::vector<double>& beams);

/// Preprocessed sample. `image` is the 224x224 resize of the raw frame;
/// channel normalization is applied by image_input().
struct Sample {
  std::string id;
  RgbImage image;
  PositionInput position;
  double east_m = 0.0;
  double north_m = 0.0;
  double distance_m = 0.0;
  BBoxTensor bboxes;
  double gt_pl = 0.0;
  double gt_sh = 0.0;
  double gt_rssi = 0.0;
};

struct NormalizationStats {
  double dx_min = 0.0, dx_max = 1.0;
  double dy_min = 0.0, dy_max = 1.0;
  std::array<double, 3> channel_mean{0.0, 0.0, 0.0};
  std::array<double, 3> channel_std{1.0, 1.0, 1.0};

  std::string to_text() const;
  static NormalizationStats from_text(const std::string& text);
};

struct IngestOptions {
  PathLossParams path_loss;
  std::optional<int> drop_class;
};

/// Builds a sample from raw modalities; position is left unnormalized.
Sample make_sample(std::string id, const RgbImage& frame, const LatLon& rx, const LatLon& tx,
                   const std::vector<BoxAnnotation>& boxes, const std::vector<double>& beams,
                   const IngestOptions& options);

/// Reads one manifest row from disk (position unnormalized).
Sample ingest(const std::filesystem::path& root, const ManifestRow& row, const IngestOptions& options);

NormalizationStats compute_stats(const std::vector<Sample>& samples, const std::vector<std::size_t>& train);

PositionInput normalize_position(double east_m, double north_m, const NormalizationStats& stats);
void apply_stats(Sample& sample, const NormalizationStats& stats);

/// ingest() followed by position normalization.
Sample preprocess(const std::filesystem::path& root, const ManifestRow& row, const NormalizationStats& stats,
                  const IngestOptions& options);

ImageInput image_input(const RgbImage& image, const NormalizationStats& stats);
/// Batched [N,3,224,224] tensor of normalized images.
Tensor image_batch(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices,
                   const NormalizationStats& stats);

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; sizes floor(0.8n), floor(0.1n), remainder to test.
DatasetSplit split_indices(std::size_t n, std::uint64_t seed);
std::array<Manifest, 3> split(const Manifest& manifest, std::uint64_t seed);

std::string format_split(const DatasetSplit& split, const std::vector<Sample>& samples);
/// Inverse of format_split. Throws FormatError on unknown ids or split names.
DatasetSplit parse_split(const std::string& text, const std::vector<Sample>& samples);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

struct PreparedDataset {
  std::vector<Sample> samples;
  DatasetSplit split;
  NormalizationStats stats;
};

/// Splits, computes training-split statistics and normalizes every sample.
PreparedDataset prepare(std::vector<Sample> samples, std::uint64_t split_seed);

std::vector<Sample> load_samples(const std::filesystem::path& root, const IngestOptions& options);

}  // namespace visrssi
