// Copyright 2026 The visrssi Authors
// SPDX-License-Identifier: Apache-2.0

#include "visrssi/scene_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "visrssi/errors.hpp"
#include "visrssi/rng.hpp"

namespace visrssi {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMinDepthM = 0.5;
constexpr double kMinDistractorRangeM = 7.5;
constexpr int kPlacementAttempts = 20;

// Stream tags for the per-scene generator.
constexpr std::uint64_t kShadowStream = 0x5ad0;
constexpr std::uint64_t kBeamStream = 0xbea3;

struct Rgb {
  std::uint8_t r, g, b;
};
constexpr Rgb kSky{135, 180, 235};
constexpr Rgb kGround{96, 96, 100};

Rgb class_color(int class_id) {
  switch (class_id) {
    case kTxClass: return {220, 40, 40};
    case kCarClass: return {40, 80, 200};
    case kPedestrianClass: return {240, 200, 40};
    case kSignClass: return {40, 170, 60};
    default: return {200, 200, 200};
  }
}

class Projector {
 public:
  explicit Projector(const CameraModel& cam)
      : cam_(cam),
        f_(cam.focal_px()),
        cx_(static_cast<double>(cam.width) / 2.0),
        cy_(static_cast<double>(cam.height) / 2.0),
        s_(std::sin(cam.pitch_down_deg * kDeg)),
        c_(std::cos(cam.pitch_down_deg * kDeg)) {}

  /// Camera-frame depth of a world point (north, up); the camera faces north.
  double depth(double n, double z) const { return n * c_ - (z - cam_.mount_height_m) * s_; }

  bool project(double e, double n, double z, double& u, double& v) const {
    const double zc = depth(n, z);
    if (zc < kMinDepthM) return false;
    const double yc = -n * s_ - (z - cam_.mount_height_m) * c_;
    u = cx_ + f_ * e / zc;
    v = cy_ + f_ * yc / zc;
    return true;
  }

  bool inside(double u, double v) const {
    return u >= 0.0 && v >= 0.0 && u < static_cast<double>(cam_.width) && v < static_cast<double>(cam_.height);
  }

  /// First image row whose ray points below the horizon.
  double horizon_row() const { return cy_ - f_ * s_ / c_; }

 private:
  CameraModel cam_;
  double f_, cx_, cy_, s_, c_;
};

// Projects an axis-aligned box; false when any corner is behind the camera or
// the projection misses the image entirely.
bool project_box(const Projector& proj, const CameraModel& cam, double e, double n, double w, double l, double h,
                 RenderedObject& out) {
  double umin = 1e300, umax = -1e300, vmin = 1e300, vmax = -1e300;
  for (int k = 0; k < 8; ++k) {
    const double pe = e + ((k & 1) ? 0.5 : -0.5) * w;
    const double pn = n + ((k & 2) ? 0.5 : -0.5) * l;
    const double pz = (k & 4) ? h : 0.0;
    double u = 0.0, v = 0.0;
    if (!proj.project(pe, pn, pz, u, v)) return false;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  // Pixels whose extent intersects [min, max); at least one pixel per axis.
  auto span = [](double lo, double hi, std::size_t limit, std::size_t& a, std::size_t& b) {
    const double first = std::floor(lo);
    const double last = std::max(first, std::ceil(hi) - 1.0);
    if (last < 0.0 || first >= static_cast<double>(limit)) return false;
    a = static_cast<std::size_t>(std::max(first, 0.0));
    b = static_cast<std::size_t>(std::min(last, static_cast<double>(limit - 1)));
    return true;
  };
  if (!span(umin, umax, cam.width, out.x0, out.x1)) return false;
  if (!span(vmin, vmax, cam.height, out.y0, out.y1)) return false;
  const double W = static_cast<double>(cam.width), H = static_cast<double>(cam.height);
  out.box.x_center = (static_cast<double>(out.x0 + out.x1) + 1.0) / 2.0 / W;
  out.box.y_center = (static_cast<double>(out.y0 + out.y1) + 1.0) / 2.0 / H;
  out.box.width = static_cast<double>(out.x1 - out.x0 + 1) / W;
  out.box.height = static_cast<double>(out.y1 - out.y0 + 1) / H;
  out.depth_m = proj.depth(n, 0.0);
  return true;
}

bool footprints_overlap(double e1, double n1, double w1, double l1, double e2, double n2, double w2, double l2,
                        double margin) {
  return std::abs(e1 - e2) < 0.5 * (w1 + w2) + margin && std::abs(n1 - n2) < 0.5 * (l1 + l2) + margin;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

}  // namespace

double OcclusionModel::attenuation(int class_id) const {
  switch (class_id) {
    case kCarClass: return car_db;
    case kPedestrianClass: return pedestrian_db;
    case kSignClass: return sign_db;
    default: return 0.0;
  }
}

void OcclusionModel::validate() const {
  if (!(sigma_sh_db >= 0.0)) throw Error("sigma_sh must be >= 0");
  if (!(car_db >= 0.0 && pedestrian_db >= 0.0 && sign_db >= 0.0)) throw Error("attenuations must be >= 0");
}

double CameraModel::focal_px() const { return static_cast<double>(width) / 2.0 / std::tan(hfov_deg * kDeg / 2.0); }

std::array<double, 3> class_dimensions(int class_id) {
  switch (class_id) {
    case kTxClass: return {2.0, 5.0, 2.2};
    case kCarClass: return {1.8, 4.5, 1.5};
    case kPedestrianClass: return {0.6, 0.6, 1.7};
    case kSignClass: return {0.9, 0.3, 2.6};
    default: throw Error("unknown object class " + std::to_string(class_id));
  }
}

bool segment_hits_box(const Point3& from, const Point3& to, const Distractor& d) {
  // Slab test of the parametric segment p(t) = from + t * (to - from), t in [0, 1].
  double t0 = 0.0, t1 = 1.0;
  const double o[3] = {from.east_m, from.north_m, from.up_m};
  const double dir[3] = {to.east_m - from.east_m, to.north_m - from.north_m, to.up_m - from.up_m};
  const double lo[3] = {d.east_m - 0.5 * d.width_m, d.north_m - 0.5 * d.length_m, 0.0};
  const double hi[3] = {d.east_m + 0.5 * d.width_m, d.north_m + 0.5 * d.length_m, d.height_m};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / dir[a], tb = (hi[a] - o[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

Scene layout_scene(const SceneSpec& spec, const CameraModel& camera) {
  Scene scene;
  scene.spec = spec;
  scene.camera = camera;
  scene.tx_offset = geodetic_to_local(spec.rx, spec.tx);
  const Projector proj(camera);
  const auto txd = class_dimensions(kTxClass);
  const double te = scene.tx_offset.east_m, tn = scene.tx_offset.north_m;

  double u = 0.0, v = 0.0;
  if (!proj.project(te, tn, kTxAntennaHeightM, u, v) || !proj.inside(u, v))
    throw TxOutOfFrustum("transmitter at (" + fmt(te) + ", " + fmt(tn) + ") m is outside the camera view");

  RenderedObject tx;
  tx.class_id = kTxClass;
  if (!project_box(proj, camera, te, tn, txd[0], txd[1], txd[2], tx))
    throw TxOutOfFrustum("transmitter box does not project into the image");
  tx.box.class_id = kTxClass;
  scene.objects.push_back(tx);

  const Point3 rx_antenna{0.0, 0.0, camera.mount_height_m};
  const Point3 tx_antenna{te, tn, kTxAntennaHeightM};
  scene.occluding.resize(spec.distractors.size());
  for (std::size_t i = 0; i < spec.distractors.size(); ++i) {
    const Distractor& d = spec.distractors[i];
    scene.occluding[i] = segment_hits_box(rx_antenna, tx_antenna, d);
    RenderedObject o;
    o.class_id = d.class_id;
    o.distractor_index = static_cast<int>(i);
    if (!project_box(proj, camera, d.east_m, d.north_m, d.width_m, d.length_m, d.height_m, o)) continue;
    o.box.class_id = d.class_id;
    scene.objects.push_back(o);
  }
  for (const auto& o : scene.objects) scene.annotations.push_back(o.box);
  return scene;
}

void render_scene(Scene& scene) {
  const CameraModel& cam = scene.camera;
  scene.image = RgbImage(cam.width, cam.height);
  const Projector proj(cam);
  const double horizon = proj.horizon_row();
  for (std::size_t y = 0; y < cam.height; ++y) {
    const Rgb c = (static_cast<double>(y) + 0.5) < horizon ? kSky : kGround;
    for (std::size_t x = 0; x < cam.width; ++x) {
      std::uint8_t* p = scene.image.at(x, y);
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
  }
  std::vector<const RenderedObject*> order;
  for (const auto& o : scene.objects) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(),
                   [](const RenderedObject* a, const RenderedObject* b) { return a->depth_m > b->depth_m; });
  for (const RenderedObject* o : order) {
    const Rgb c = class_color(o->class_id);
    for (std::size_t y = o->y0; y <= o->y1; ++y) {
      for (std::size_t x = o->x0; x <= o->x1; ++x) {
        std::uint8_t* p = scene.image.at(x, y);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
      }
    }
  }
}

Scene generate_scene(const SceneSpec& spec, const CameraModel& camera) {
  Scene s = layout_scene(spec, camera);
  render_scene(s);
  return s;
}

LinkTruth ground_truth_link(const Scene& scene, const OcclusionModel& occlusion, const PathLossParams& pl_params) {
  occlusion.validate();
  LinkTruth t;
  t.pl_db = path_loss(pl_params, scene.tx_offset.distance_m);
  double beta = 0.0;
  for (std::size_t i = 0; i < scene.spec.distractors.size(); ++i) {
    if (!scene.occluding[i]) continue;
    const int cls = scene.spec.distractors[i].class_id;
    beta += occlusion.attenuation(cls);
    if (cls >= 0 && cls < 4) ++t.occluders_per_class[static_cast<std::size_t>(cls)];
  }
  Rng shadow(derive_seed(scene.spec.rng_seed, kShadowStream));
  beta += occlusion.sigma_sh_db * shadow.normal();
  t.beta_db = beta;
  t.rssi_db = occlusion.p_t_virtual_db - t.pl_db - beta;
  // equals sh_proxy_ground_truth(rssi, pl) up to rounding, exact when beta == 0
  t.sh_db = occlusion.p_t_virtual_db - beta;

  // Positive per-beam spread normalized so the mean linear power is exact.
  Rng beams(derive_seed(scene.spec.rng_seed, kBeamStream));
  std::vector<double> w(kBeamCount);
  double sum = 0.0;
  for (double& x : w) {
    x = std::exp(0.5 * beams.normal());
    sum += x;
  }
  const double mean_w = sum / static_cast<double>(kBeamCount);
  const double p_lin = std::pow(10.0, t.rssi_db / 10.0);
  t.beam_powers.resize(kBeamCount);
  for (std::size_t i = 0; i < kBeamCount; ++i) t.beam_powers[i] = p_lin * (w[i] / mean_w);
  return t;
}

void SimConfig::validate() const {
  occlusion.validate();
  path_loss.validate();
  if (!(min_distance_m >= path_loss.min_distance) || !(max_distance_m >= min_distance_m))
    throw Error("distance range must satisfy min_distance <= min <= max");
  if (!(corridor_fraction >= 0.0 && corridor_fraction <= 1.0)) throw Error("corridor fraction must be in [0,1]");
  if (!(bearing_limit_deg > 0.0 && bearing_limit_deg < camera.hfov_deg / 2.0))
    throw Error("bearing limit must lie within the camera field of view");
}

std::string SimConfig::to_text() const {
  std::ostringstream os;
  os << "anchor_lat=" << fmt(anchor.lat) << "\n"
     << "anchor_lon=" << fmt(anchor.lon) << "\n"
     << "min_distance_m=" << fmt(min_distance_m) << "\n"
     << "max_distance_m=" << fmt(max_distance_m) << "\n"
     << "max_distractors=" << max_distractors << "\n"
     << "corridor_fraction=" << fmt(corridor_fraction) << "\n"
     << "corridor_half_width_m=" << fmt(corridor_half_width_m) << "\n"
     << "bearing_limit_deg=" << fmt(bearing_limit_deg) << "\n"
     << "sigma_sh_db=" << fmt(occlusion.sigma_sh_db) << "\n"
     << "car_db=" << fmt(occlusion.car_db) << "\n"
     << "pedestrian_db=" << fmt(occlusion.pedestrian_db) << "\n"
     << "sign_db=" << fmt(occlusion.sign_db) << "\n"
     << "p_t_virtual_db=" << fmt(occlusion.p_t_virtual_db) << "\n"
     << "path_loss_exponent=" << fmt(path_loss.exponent) << "\n"
     << "path_loss_min_distance_m=" << fmt(path_loss.min_distance) << "\n"
     << "camera_width=" << camera.width << "\n"
     << "camera_height=" << camera.height << "\n"
     << "camera_hfov_deg=" << fmt(camera.hfov_deg) << "\n"
     << "camera_mount_height_m=" << fmt(camera.mount_height_m) << "\n"
     << "camera_pitch_down_deg=" << fmt(camera.pitch_down_deg) << "\n";
  return os.str();
}

SceneSpec sample_scene_spec(const SimConfig& config, std::uint64_t master_seed, std::size_t index) {
  config.validate();
  SceneSpec spec;
  spec.rng_seed = derive_seed(master_seed, index);
  Rng rng(spec.rng_seed);
  spec.rx = config.anchor;

  const double d = rng.uniform(config.min_distance_m, config.max_distance_m);
  const double bearing = rng.uniform(-config.bearing_limit_deg, config.bearing_limit_deg) * kDeg;
  const double te = d * std::sin(bearing), tn = d * std::cos(bearing);
  spec.tx = local_to_geodetic(config.anchor, te, tn);

  const auto txd = class_dimensions(kTxClass);
  const Projector proj(config.camera);
  const std::size_t count = static_cast<std::size_t>(rng.below(config.max_distractors + 1));
  const double ue = te / d, un = tn / d;  // unit ray
  for (std::size_t k = 0; k < count; ++k) {
    const double pick = rng.uniform();
    const int cls = pick < 0.5 ? kCarClass : (pick < 0.8 ? kPedestrianClass : kSignClass);
    const auto dims = class_dimensions(cls);
    const bool corridor = rng.uniform() < config.corridor_fraction;
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      double e = 0.0, n = 0.0;
      if (corridor) {
        // Only the part of the ray below the object's top can be blocked by it.
        const double drop = config.camera.mount_height_m - kTxAntennaHeightM;
        const double t_lo = std::clamp((config.camera.mount_height_m - dims[2]) / drop, 0.15, 0.9);
        const double along = rng.uniform(t_lo, 0.95) * d;
        const double lateral = rng.uniform(-config.corridor_half_width_m, config.corridor_half_width_m);
        e = along * ue + lateral * un;
        n = along * un - lateral * ue;
      } else {
        const double r = rng.uniform(kMinDistractorRangeM, config.max_distance_m);
        const double b = rng.uniform(-config.camera.hfov_deg / 2.0 + 2.0, config.camera.hfov_deg / 2.0 - 2.0) * kDeg;
        e = r * std::sin(b);
        n = r * std::cos(b);
      }
      if (std::hypot(e, n) < kMinDistractorRangeM) continue;
      if (footprints_overlap(e, n, dims[0], dims[1], te, tn, txd[0], txd[1], 0.5)) continue;
      double u = 0.0, v = 0.0;
      if (!proj.project(e, n, 0.5 * dims[2], u, v) || !proj.inside(u, v)) continue;
      spec.distractors.push_back({cls, e, n, dims[0], dims[1], dims[2]});
      break;
    }
  }
  return spec;
}

std::vector<SimulatedSample> simulate_samples(const SimConfig& config, std::size_t count, std::uint64_t master_seed,
                                              std::optional<int> drop_class) {
  std::vector<SimulatedSample> out;
  out.reserve(count);
  const IngestOptions opts{config.path_loss, drop_class};
  char id[32];
  for (std::size_t i = 0; i < count; ++i) {
    const SceneSpec spec = sample_scene_spec(config, master_seed, i);
    const Scene scene = generate_scene(spec, config.camera);
    LinkTruth truth = ground_truth_link(scene, config.occlusion, config.path_loss);
    std::snprintf(id, sizeof id, "s%06zu", i);
    Sample s = make_sample(id, scene.image, spec.rx, spec.tx, scene.annotations, truth.beam_powers, opts);
    out.push_back({std::move(s), std::move(truth)});
  }
  return out;
}

void generate_dataset(const std::filesystem::path& root, std::size_t count, const SimConfig& config,
                      std::uint64_t master_seed) {
  if (count == 0) throw Error("dataset count must be >= 1");
  config.validate();
  std::error_code ec;
  for (const char* sub : {"images", "bboxes", "beams"}) {
    std::filesystem::create_directories(root / sub, ec);
    if (ec) throw IoError("cannot create " + (root / sub).string() + ": " + ec.message());
  }
  Manifest manifest;
  std::string truth_csv = "sample_id,distance_m,pl_db,sh_db,rssi_db,beta_db,occ_car,occ_pedestrian,occ_sign\n";
  char stem[32];
  for (std::size_t i = 0; i < count; ++i) {
    const SceneSpec spec = sample_scene_spec(config, master_seed, i);
    const Scene scene = generate_scene(spec, config.camera);
    const LinkTruth truth = ground_truth_link(scene, config.occlusion, config.path_loss);
    std::snprintf(stem, sizeof stem, "%06zu", i);
    ManifestRow row;
    row.sample_id = std::string("s") + stem;
    row.image_path = std::string("images/") + stem + ".ppm";
    row.bbox_path = std::string("bboxes/") + stem + ".txt";
    row.beam_path = std::string("beams/") + stem + ".txt";
    row.rx = spec.rx;
    row.tx = spec.tx;
    write_ppm(root / row.image_path, scene.image);
    write_file(root / row.bbox_path, format_yolo(scene.annotations));
    write_file(root / row.beam_path, format_beams(truth.beam_powers));
    truth_csv += row.sample_id + "," + fmt(scene.tx_offset.distance_m) + "," + fmt(truth.pl_db) + "," +
                 fmt(truth.sh_db) + "," + fmt(truth.rssi_db) + "," + fmt(truth.beta_db) + "," +
                 std::to_string(truth.occluders_per_class[kCarClass]) + "," +
                 std::to_string(truth.occluders_per_class[kPedestrianClass]) + "," +
                 std::to_string(truth.occluders_per_class[kSignClass]) + "\n";
    manifest.rows.push_back(std::move(row));
  }
  write_manifest(root, manifest);
  write_file(root / "scene_truth.csv", truth_csv);
}

}  // namespace visrssi
