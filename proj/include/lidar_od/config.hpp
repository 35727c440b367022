#pragma once

// Pipeline configuration: one JSON document with a section per module.
// Angles are stored in degrees in the file and radians in memory. Unknown
// keys are rejected so typos do not silently fall back to defaults.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidar_od/bev_features.hpp"
#include "lidar_od/cluster.hpp"
#include "lidar_od/eval.hpp"
#include "lidar_od/ground_filter.hpp"
#include "lidar_od/grid.hpp"
#include "lidar_od/io.hpp"
#include "lidar_od/synth.hpp"

namespace lod {

enum class PipelineKind { kGeometric, kBev };

struct ClusterConfig {
  Connectivity connectivity = Connectivity::kEight;
  int kernel_radius = 1;
  std::size_t min_cells = 2;
};

struct BevPipelineConfig {
  BevConfig geometry;
  double objectness_threshold = 0.5;
  double min_confidence = 0.5;
  double detector_min_height = 0.3;
  std::vector<std::string> class_names;
};

struct EvalConfig {
  EvalParams params;
  std::optional<GeoReference> reference;
};

struct SynthConfig {
  SceneSpec scene;
  std::size_t frames = 1;
};

struct BenchConfig {
  std::size_t frames = 50;
  double azimuth_resolution_deg = 0.1;
};

struct PipelineConfig {
  PipelineKind pipeline = PipelineKind::kGeometric;
  double frame_period = 0.05;
  RansacParams ground_filter;
  GridConfig grid;
  ThresholdProfile thresholds;
  ClusterConfig cluster;
  BevPipelineConfig bev;
  EvalConfig eval;
  SynthConfig synth;
  BenchConfig bench;

  static PipelineConfig defaults() {
    PipelineConfig c;
    BoxSpec van;
    van.center_x = 10.0;
    van.length = 5.0;
    van.width = 2.0;
    van.height = 2.0;
    c.synth.scene.obstacles.push_back(van);
    return c;
  }

  void validate() const {
    if (ground_filter.max_iterations < 1 || !(ground_filter.distance_threshold > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "ground_filter needs max_iterations >= 1 and distance_threshold > 0");
    }
    grid.validate();
    thresholds.validate();
    if (cluster.kernel_radius < 1) throw Error(ErrorCode::kInvalidConfig, "cluster.kernel_radius must be >= 1");
    bev.geometry.validate();
    synth.scene.validate();
    if (!(frame_period > 0.0)) throw Error(ErrorCode::kInvalidConfig, "frame_period must be > 0");
  }
};

namespace detail {

inline constexpr double kDeg = std::numbers::pi / 180.0;
// Degrees for display, rounded to 1e-9 so round-off from the radian
// conversion does not show in dumped configs.
inline double to_deg(double radians) { return std::round(radians / kDeg * 1e9) / 1e9; }

// Reads `key` into `out` when present; records the key as known.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw Error(ErrorCode::kInvalidConfig, "section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [k, v] : j_.items()) {
      if (!known_.count(k)) throw Error(ErrorCode::kInvalidConfig, "unknown key '" + name_ + "." + k + "'");
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, "bad value for '" + name_ + "." + key + "': " + e.what());
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    T v{};
    known_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) {
      out.reset();
      return;
    }
    get(key, v);
    out = v;
  }

  void get_deg(const std::string& key, double& radians) {
    std::optional<double> deg;
    get(key, deg);
    if (deg) radians = *deg * kDeg;
  }

  const nlohmann::json* child(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  const std::string& name() const { return name_; }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> known_;
};

inline nlohmann::json box_to_json(const BoxSpec& b) {
  return {{"center_x", b.center_x}, {"center_y", b.center_y}, {"length", b.length},
          {"width", b.width},       {"height", b.height},     {"yaw_deg", detail::to_deg(b.yaw)},
          {"clearance", b.clearance}, {"velocity_x", b.velocity_x}, {"velocity_y", b.velocity_y}};
}

inline BoxSpec box_from_json(const nlohmann::json& j) {
  BoxSpec b;
  Section s(j, "synth.scene.obstacles[]");
  s.get("center_x", b.center_x);
  s.get("center_y", b.center_y);
  s.get("length", b.length);
  s.get("width", b.width);
  s.get("height", b.height);
  s.get_deg("yaw_deg", b.yaw);
  s.get("clearance", b.clearance);
  s.get("velocity_x", b.velocity_x);
  s.get("velocity_y", b.velocity_y);
  return b;
}

}  // namespace detail

inline nlohmann::json to_json(const PipelineConfig& c) {
  using nlohmann::json;
  using detail::kDeg;
  json thresholds = json::array();
  for (const auto& bp : c.thresholds.breakpoints) thresholds.push_back({bp.range_start, bp.count_threshold});
  json boxes = json::array();
  for (const auto& b : c.synth.scene.obstacles) boxes.push_back(detail::box_to_json(b));
  const auto& sensor = c.synth.scene.sensor;

  json j;
  j["pipeline"] = c.pipeline == PipelineKind::kGeometric ? "geometric" : "bev";
  j["frame_period"] = c.frame_period;
  j["ground_filter"] = {{"max_iterations", c.ground_filter.max_iterations},
                        {"distance_threshold", c.ground_filter.distance_threshold},
                        {"min_inlier_ratio", c.ground_filter.min_inlier_ratio},
                        {"rng_seed", c.ground_filter.rng_seed},
                        {"max_plane_tilt_deg", detail::to_deg(c.ground_filter.max_plane_tilt)}};
  j["grid"] = {{"cell_size", c.grid.cell_size}, {"x_min", c.grid.x_min}, {"x_max", c.grid.x_max},
               {"y_min", c.grid.y_min},         {"y_max", c.grid.y_max}, {"z_min", c.grid.z_min},
               {"z_max", c.grid.z_max},         {"thresholds", thresholds},
               {"noise_min_count", c.thresholds.noise_min_count}};
  j["cluster"] = {{"connectivity", static_cast<int>(c.cluster.connectivity)},
                  {"kernel_radius", c.cluster.kernel_radius},
                  {"min_cells", c.cluster.min_cells}};
  j["bev"] = {{"image_size", c.bev.geometry.image_size},
              {"range", c.bev.geometry.range},
              {"density", c.bev.geometry.density_mode == DensityMode::kRawCount ? "count" : "log"},
              {"density_log_norm", c.bev.geometry.density_log_norm},
              {"objectness_threshold", c.bev.objectness_threshold},
              {"min_confidence", c.bev.min_confidence},
              {"detector_min_height", c.bev.detector_min_height},
              {"class_names", c.bev.class_names}};
  j["eval"] = {{"gate", c.eval.params.gate},
               {"lever_arm", {c.eval.params.lever_dx, c.eval.params.lever_dy}},
               {"time_tolerance", c.eval.params.time_tolerance},
               {"ref_lat", c.eval.reference ? json(c.eval.reference->lat) : json(nullptr)},
               {"ref_lon", c.eval.reference ? json(c.eval.reference->lon) : json(nullptr)}};
  j["synth"] = {{"frames", c.synth.frames},
                {"scene",
                 {{"range_noise_sigma", c.synth.scene.range_noise_sigma},
                  {"rng_seed", c.synth.scene.rng_seed},
                  {"ground",
                   {{"slope_deg", detail::to_deg(c.synth.scene.ground.slope)},
                    {"slope_direction_deg", detail::to_deg(c.synth.scene.ground.slope_direction)}}},
                  {"sensor",
                   {{"beam_count", sensor.beam_count},
                    {"fov_min_deg", sensor.fov_min_deg},
                    {"fov_max_deg", sensor.fov_max_deg},
                    {"azimuth_resolution_deg", sensor.azimuth_resolution_deg},
                    {"max_range", sensor.max_range},
                    {"height", sensor.height}}},
                  {"obstacles", boxes}}}};
  j["bench"] = {{"frames", c.bench.frames}, {"azimuth_resolution_deg", c.bench.azimuth_resolution_deg}};
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c = PipelineConfig::defaults();
  detail::Section root(j, "<root>");

  std::string pipeline = "geometric";
  root.get("pipeline", pipeline);
  if (pipeline == "geometric") {
    c.pipeline = PipelineKind::kGeometric;
  } else if (pipeline == "bev") {
    c.pipeline = PipelineKind::kBev;
  } else {
    throw Error(ErrorCode::kInvalidConfig, "pipeline must be 'geometric' or 'bev', got '" + pipeline + "'");
  }
  root.get("frame_period", c.frame_period);

  if (const auto* s = root.child("ground_filter")) {
    detail::Section g(*s, "ground_filter");
    g.get("max_iterations", c.ground_filter.max_iterations);
    g.get("distance_threshold", c.ground_filter.distance_threshold);
    g.get("min_inlier_ratio", c.ground_filter.min_inlier_ratio);
    g.get("rng_seed", c.ground_filter.rng_seed);
    g.get_deg("max_plane_tilt_deg", c.ground_filter.max_plane_tilt);
  }
  if (const auto* s = root.child("grid")) {
    detail::Section g(*s, "grid");
    g.get("cell_size", c.grid.cell_size);
    g.get("x_min", c.grid.x_min);
    g.get("x_max", c.grid.x_max);
    g.get("y_min", c.grid.y_min);
    g.get("y_max", c.grid.y_max);
    g.get("z_min", c.grid.z_min);
    g.get("z_max", c.grid.z_max);
    g.get("noise_min_count", c.thresholds.noise_min_count);
    std::vector<std::pair<double, std::uint32_t>> bps;
    g.get("thresholds", bps);
    if (!bps.empty()) {
      c.thresholds.breakpoints.clear();
      for (const auto& [r, t] : bps) c.thresholds.breakpoints.push_back({r, t});
    }
  }
  if (const auto* s = root.child("cluster")) {
    detail::Section g(*s, "cluster");
    int conn = static_cast<int>(c.cluster.connectivity);
    g.get("connectivity", conn);
    if (conn != 4 && conn != 8) throw Error(ErrorCode::kInvalidConfig, "cluster.connectivity must be 4 or 8");
    c.cluster.connectivity = conn == 4 ? Connectivity::kFour : Connectivity::kEight;
    g.get("kernel_radius", c.cluster.kernel_radius);
    g.get("min_cells", c.cluster.min_cells);
  }
  if (const auto* s = root.child("bev")) {
    detail::Section g(*s, "bev");
    g.get("image_size", c.bev.geometry.image_size);
    g.get("range", c.bev.geometry.range);
    std::string density = "log";
    g.get("density", density);
    if (density != "log" && density != "count") throw Error(ErrorCode::kInvalidConfig, "bev.density must be 'log' or 'count'");
    c.bev.geometry.density_mode = density == "count" ? DensityMode::kRawCount : DensityMode::kLogNormalized;
    g.get("density_log_norm", c.bev.geometry.density_log_norm);
    g.get("objectness_threshold", c.bev.objectness_threshold);
    g.get("min_confidence", c.bev.min_confidence);
    g.get("detector_min_height", c.bev.detector_min_height);
    g.get("class_names", c.bev.class_names);
  }
  if (const auto* s = root.child("eval")) {
    detail::Section g(*s, "eval");
    g.get("gate", c.eval.params.gate);
    std::vector<double> lever{c.eval.params.lever_dx, c.eval.params.lever_dy};
    g.get("lever_arm", lever);
    if (lever.size() != 2) throw Error(ErrorCode::kInvalidConfig, "eval.lever_arm must be [dx, dy]");
    c.eval.params.lever_dx = lever[0];
    c.eval.params.lever_dy = lever[1];
    g.get("time_tolerance", c.eval.params.time_tolerance);
    std::optional<double> lat, lon;
    g.get("ref_lat", lat);
    g.get("ref_lon", lon);
    if (lat.has_value() != lon.has_value()) {
      throw Error(ErrorCode::kInvalidConfig, "eval.ref_lat and eval.ref_lon must be set together");
    }
    if (lat) c.eval.reference = GeoReference{*lat, *lon};
  }
  if (const auto* s = root.child("synth")) {
    detail::Section g(*s, "synth");
    g.get("frames", c.synth.frames);
    if (const auto* sc = g.child("scene")) {
      detail::Section scene(*sc, "synth.scene");
      auto& spec = c.synth.scene;
      scene.get("range_noise_sigma", spec.range_noise_sigma);
      scene.get("rng_seed", spec.rng_seed);
      if (const auto* gr = scene.child("ground")) {
        detail::Section ground(*gr, "synth.scene.ground");
        ground.get_deg("slope_deg", spec.ground.slope);
        ground.get_deg("slope_direction_deg", spec.ground.slope_direction);
      }
      if (const auto* se = scene.child("sensor")) {
        detail::Section sensor(*se, "synth.scene.sensor");
        sensor.get("beam_count", spec.sensor.beam_count);
        sensor.get("fov_min_deg", spec.sensor.fov_min_deg);
        sensor.get("fov_max_deg", spec.sensor.fov_max_deg);
        sensor.get("azimuth_resolution_deg", spec.sensor.azimuth_resolution_deg);
        sensor.get("max_range", spec.sensor.max_range);
        sensor.get("height", spec.sensor.height);
      }
      if (const auto* obs = scene.child("obstacles")) {
        if (!obs->is_array()) throw Error(ErrorCode::kInvalidConfig, "synth.scene.obstacles must be an array");
        spec.obstacles.clear();
        for (const auto& b : *obs) spec.obstacles.push_back(detail::box_from_json(b));
      }
    }
  }
  if (const auto* s = root.child("bench")) {
    detail::Section g(*s, "bench");
    g.get("frames", c.bench.frames);
    g.get("azimuth_resolution_deg", c.bench.azimuth_resolution_deg);
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const std::string& path) {
  auto in = open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kInvalidConfig, path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace lod
