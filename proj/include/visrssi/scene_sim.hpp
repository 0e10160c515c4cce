// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic V2I scenes: a pole-mounted receiver camera looking north over a
// flat ground plane, a transmitter vehicle, and box-shaped distractors. The
// generator also acts as the ground-truth oracle: shadowing is the sum of
// per-class attenuations of every distractor whose box the Rx-Tx antenna
// segment passes through, plus seeded log-normal noise.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "visrssi/dataset.hpp"
#include "visrssi/image.hpp"
#include "visrssi/physics.hpp"

namespace visrssi {

struct Distractor {
  int class_id = kCarClass;
  double east_m = 0.0;   ///< footprint center, relative to Rx
  double north_m = 0.0;
  double width_m = 1.8;  ///< east-west extent
  double length_m = 4.5; ///< north-south extent
  double height_m = 1.5;
};

struct SceneSpec {
  LatLon rx;
  LatLon tx;
  std::vector<Distractor> distractors;
  std::uint64_t rng_seed = 0;
};

struct OcclusionModel {
  double sigma_sh_db = 1.0;
  double car_db = 4.0;
  double pedestrian_db = 1.0;
  double sign_db = 2.0;
  double p_t_virtual_db = -50.0;

  double attenuation(int class_id) const;
  void validate() const;
};

struct CameraModel {
  std::size_t width = 960;
  std::size_t height = 540;
  double hfov_deg = 60.0;
  double mount_height_m = 2.0;
  double pitch_down_deg = 5.0;

  double focal_px() const;
};

/// Physical box dimensions per class (width, length, height in meters).
std::array<double, 3> class_dimensions(int class_id);

/// One projected object; pixel bounds are inclusive.
struct RenderedObject {
  int class_id = 0;
  int distractor_index = -1;  ///< -1 for the transmitter
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double depth_m = 0.0;
  BoxAnnotation box;
};

struct Scene {
  SceneSpec spec;
  CameraModel camera;
  LocalOffset tx_offset;
  std::vector<RenderedObject> objects;      ///< visible objects, Tx first
  std::vector<BoxAnnotation> annotations;   ///< YOLO boxes of `objects`
  std::vector<bool> occluding;              ///< per distractor in spec order
  RgbImage image;
};

struct LinkTruth {
  double pl_db = 0.0;
  double sh_db = 0.0;
  double rssi_db = 0.0;
  double beta_db = 0.0;
  std::array<int, 4> occluders_per_class{};  ///< indexed by class id
  std::vector<double> beam_powers;
};

struct Point3 {
  double east_m = 0.0;
  double north_m = 0.0;
  double up_m = 0.0;
};

/// Tx antenna height above ground; the Rx antenna sits at the camera mount.
inline constexpr double kTxAntennaHeightM = 1.1;

/// True when the segment from `from` to `to` passes through the distractor's
/// axis-aligned box (ground to height_m).
bool segment_hits_box(const Point3& from, const Point3& to, const Distractor& d);

/// Projects every object and computes annotations and occlusion flags without
/// rasterizing. Throws TxOutOfFrustum if the transmitter center is off-image.
Scene layout_scene(const SceneSpec& spec, const CameraModel& camera = {});
/// Rasterizes a laid-out scene into scene.image (painter's order, far first).
void render_scene(Scene& scene);
/// layout_scene + render_scene.
Scene generate_scene(const SceneSpec& spec, const CameraModel& camera = {});

LinkTruth ground_truth_link(const Scene& scene, const OcclusionModel& occlusion, const PathLossParams& pl_params);

struct SimConfig {
  LatLon anchor{25.2048, 55.2708};
  double min_distance_m = 10.0;
  double max_distance_m = 300.0;
  std::size_t max_distractors = 12;
  double corridor_fraction = 0.5;   ///< share of distractors placed near the line of sight
  double corridor_half_width_m = 2.0;
  double bearing_limit_deg = 25.0;
  OcclusionModel occlusion;
  PathLossParams path_loss;
  CameraModel camera;

  void validate() const;
  std::string to_text() const;
};

/// Draws the spec of scene `index` from the stream derived from `master_seed`.
SceneSpec sample_scene_spec(const SimConfig& config, std::uint64_t master_seed, std::size_t index);

struct SimulatedSample {
  Sample sample;
  LinkTruth truth;
};

/// In-memory generation through the same ingestion path the on-disk reader uses.
std::vector<SimulatedSample> simulate_samples(const SimConfig& config, std::size_t count, std::uint64_t master_seed,
                                              std::optional<int> drop_class = std::nullopt);

/// Writes `count` scenes in the dataset layout plus scene_truth.csv.
void generate_dataset(const std::filesystem::path& root, std::size_t count, const SimConfig& config,
                      std::uint64_t master_seed);

}  // namespace visrssi
