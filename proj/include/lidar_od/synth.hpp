#pragma once

// Synthetic multi-beam LiDAR: ray casting against a planar ground and
// box-shaped obstacles, with exact per-point labels and ground truth.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "lidar_od/bev_features.hpp"
#include "lidar_od/core.hpp"

namespace lod {

struct GroundSpec {
  double slope = 0.0;            // radians
  double slope_direction = 0.0;  // azimuth of steepest ascent, radians
};

struct BoxSpec {
  double center_x = 0.0;
  double center_y = 0.0;
  double length = 1.0;  // along the box's own x axis
  double width = 1.0;
  double height = 1.0;
  double yaw = 0.0;
  double clearance = 0.0;  // gap between the ground and the box bottom
  double velocity_x = 0.0;  // m/s, used by scene_at
  double velocity_y = 0.0;
};

struct SensorSpec {
  int beam_count = 16;
  double fov_min_deg = -15.0;
  double fov_max_deg = 15.0;
  double azimuth_resolution_deg = 0.2;
  double max_range = 100.0;
  double height = 1.73;  // above the ground directly below the sensor

  double elevation_deg(int beam) const {
    if (beam_count == 1) return 0.5 * (fov_min_deg + fov_max_deg);
    return fov_min_deg + beam * (fov_max_deg - fov_min_deg) / (beam_count - 1);
  }
  std::size_t azimuth_steps() const {
    return static_cast<std::size_t>(std::llround(360.0 / azimuth_resolution_deg));
  }
};

struct SceneSpec {
  GroundSpec ground;
  std::vector<BoxSpec> obstacles;
  SensorSpec sensor;
  double range_noise_sigma = 0.02;
  std::uint64_t rng_seed = 1;
  double timestamp = 0.0;
  std::int64_t frame_id = 0;

  void validate() const {
    if (sensor.beam_count < 1 || !(sensor.azimuth_resolution_deg > 0.0) || !(sensor.max_range > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "sensor needs beams >= 1, positive resolution and range");
    }
    for (const BoxSpec& b : obstacles) {
      if (!(b.length > 0.0 && b.width > 0.0 && b.height > 0.0) || b.clearance < 0.0) {
        throw Error(ErrorCode::kInvalidConfig, "box dimensions must be positive");
      }
    }
    if (range_noise_sigma < 0.0) throw Error(ErrorCode::kInvalidConfig, "noise sigma must be >= 0");
  }

  // Ground height under (x, y); the sensor sits at the origin.
  double ground_z(double x, double y) const {
    const double g = std::tan(ground.slope);
    return -sensor.height + g * (x * std::cos(ground.slope_direction) + y * std::sin(ground.slope_direction));
  }
};

// The scene `t` seconds later: boxes moved by their velocities, timestamp
// advanced and the noise seed varied per frame.
inline SceneSpec scene_at(const SceneSpec& base, double t, std::int64_t frame_id) {
  SceneSpec s = base;
  for (BoxSpec& b : s.obstacles) {
    b.center_x += b.velocity_x * t;
    b.center_y += b.velocity_y * t;
  }
  s.timestamp = base.timestamp + t;
  s.frame_id = frame_id;
  s.rng_seed = base.rng_seed + static_cast<std::uint64_t>(frame_id) * 0x9E3779B97F4A7C15ull;
  return s;
}

inline constexpr int kGroundLabel = -1;

struct LabeledFrame {
  PointCloudFrame frame;
  std::vector<int> labels;  // kGroundLabel or the obstacle index
};

namespace detail {

// Entry distance of the ray t*d (t > 0) into a yawed box, if it hits.
inline std::optional<double> ray_box(double dx, double dy, double dz, const BoxSpec& b, double bottom) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  // Ray origin and direction in box coordinates.
  const double ox = c * (-b.center_x) + s * (-b.center_y);
  const double oy = -s * (-b.center_x) + c * (-b.center_y);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;

  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  auto slab = [&](double o, double d, double lo, double hi) {
    if (std::abs(d) < 1e-15) return o >= lo && o <= hi;
    double ta = (lo - o) / d, tb = (hi - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return t0 <= t1;
  };
  if (!slab(ox, lx, -0.5 * b.length, 0.5 * b.length)) return std::nullopt;
  if (!slab(oy, ly, -0.5 * b.width, 0.5 * b.width)) return std::nullopt;
  if (!slab(0.0, dz, bottom, bottom + b.height)) return std::nullopt;
  if (t0 <= 0.0) return std::nullopt;  // sensor inside the box
  return t0;
}

}  // namespace detail

// Range noise is Gaussian truncated at this many sigmas.
inline constexpr double kNoiseClip = 3.0;

// Casts one ray per (beam, azimuth step); the nearest surface within
// max_range yields a point with truncated Gaussian range noise.
inline LabeledFrame generate_frame(const SceneSpec& spec) {
  spec.validate();
  LabeledFrame out;
  out.frame.timestamp = spec.timestamp;
  out.frame.frame_id = spec.frame_id;

  std::vector<double> bottoms;
  for (const BoxSpec& b : spec.obstacles) bottoms.push_back(spec.ground_z(b.center_x, b.center_y) + b.clearance);

  const double g = std::tan(spec.ground.slope);
  const double gx = g * std::cos(spec.ground.slope_direction);
  const double gy = g * std::sin(spec.ground.slope_direction);
  constexpr double kDeg = std::numbers::pi / 180.0;

  std::mt19937_64 rng(spec.rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const std::size_t steps = spec.sensor.azimuth_steps();
  out.frame.points.reserve(steps * static_cast<std::size_t>(spec.sensor.beam_count) / 2);
  out.labels.reserve(out.frame.points.capacity());

  for (int beam = 0; beam < spec.sensor.beam_count; ++beam) {
    const double el = spec.sensor.elevation_deg(beam) * kDeg;
    const double ce = std::cos(el), dz = std::sin(el);
    for (std::size_t a = 0; a < steps; ++a) {
      const double az = static_cast<double>(a) * spec.sensor.azimuth_resolution_deg * kDeg;
      const double dx = ce * std::cos(az), dy = ce * std::sin(az);

      double best = std::numeric_limits<double>::infinity();
      int label = kGroundLabel;
      // Ground plane z = gx*x + gy*y - h.
      const double denom = dz - gx * dx - gy * dy;
      if (denom < 0.0) best = -spec.sensor.height / denom;
      for (std::size_t i = 0; i < spec.obstacles.size(); ++i) {
        const auto t = detail::ray_box(dx, dy, dz, spec.obstacles[i], bottoms[i]);
        if (t && *t < best) {
          best = *t;
          label = static_cast<int>(i);
        }
      }
      if (!(best <= spec.sensor.max_range)) continue;

      double r = best;
      if (spec.range_noise_sigma > 0.0) {
        double z = noise(rng);
        while (std::abs(z) > kNoiseClip) z = noise(rng);
        r += spec.range_noise_sigma * z;
      }
      out.frame.points.push_back({r * dx, r * dy, r * dz, label == kGroundLabel ? 0.5 : 0.8});
      out.labels.push_back(label);
    }
  }
  return out;
}

enum class DimensionConvention {
  kOriented,     // length/width of the box itself
  kAxisAligned,  // extents of the footprint's axis-aligned bounding box
};

inline std::vector<ObstacleEstimate> expected_obstacles(const SceneSpec& spec,
                                                        DimensionConvention conv = DimensionConvention::kOriented) {
  std::vector<ObstacleEstimate> out;
  for (const BoxSpec& b : spec.obstacles) {
    double l = b.length, w = b.width;
    if (conv == DimensionConvention::kAxisAligned) {
      const double c = std::abs(std::cos(b.yaw)), s = std::abs(std::sin(b.yaw));
      const double ex = b.length * c + b.width * s;
      const double ey = b.length * s + b.width * c;
      l = std::max(ex, ey);
      w = std::min(ex, ey);
    }
    out.push_back(make_obstacle(b.center_x, b.center_y, l, w, b.height, 1.0, "box"));
  }
  return out;
}

inline bool footprint_contains(const BoxSpec& b, double x, double y) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double lx = c * (x - b.center_x) + s * (y - b.center_y);
  const double ly = -s * (x - b.center_x) + c * (y - b.center_y);
  return std::abs(lx) <= 0.5 * b.length && std::abs(ly) <= 0.5 * b.width;
}

// Ideal detector output for the given boxes: every cell whose center lies in
// a footprint is an object cell whose offset points at the box center.
inline OutputAttributeGrid footprint_attribute_grid(const std::vector<BoxSpec>& boxes, const BevConfig& cfg,
                                                    float confidence = 0.9f) {
  OutputAttributeGrid g = OutputAttributeGrid::zeros(cfg);
  for (std::size_t r = 0; r < cfg.image_size; ++r) {
    const double y = cfg.center_of(r);
    for (std::size_t c = 0; c < cfg.image_size; ++c) {
      const double x = cfg.center_of(c);
      for (const BoxSpec& b : boxes) {
        if (!footprint_contains(b, x, y)) continue;
        g.objectness(r, c) = 1.0f;
        g.offset_x(r, c) = static_cast<float>(b.center_x - x);
        g.offset_y(r, c) = static_cast<float>(b.center_y - y);
        g.confidence(r, c) = confidence;
        g.height(r, c) = static_cast<float>(b.height);
        g.heading(r, c) = static_cast<float>(b.yaw);
        break;
      }
    }
  }
  return g;
}

// Detector that ignores its input and reports the scene's true footprints.
class FootprintDetector : public Detector {
 public:
  explicit FootprintDetector(std::vector<BoxSpec> boxes) : boxes_(std::move(boxes)) {}
  OutputAttributeGrid detect(const ChannelImage& image) override {
    return footprint_attribute_grid(boxes_, image.geometry);
  }

 private:
  std::vector<BoxSpec> boxes_;
};

struct RandomSceneOptions {
  int min_boxes = 1;
  int max_boxes = 3;
  double max_slope = 5.0 * std::numbers::pi / 180.0;
  double min_range = 6.0;
  double max_range = 25.0;
  double clearance = 0.0;
};

// Vehicle-like boxes at random, mutually separated positions.
inline SceneSpec random_scene(std::uint64_t seed, const RandomSceneOptions& opt = {},
                              const SensorSpec& sensor = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  SceneSpec spec;
  spec.sensor = sensor;
  spec.rng_seed = seed ^ 0x9E3779B97F4A7C15ull;
  spec.ground.slope = uniform(0.0, opt.max_slope);
  spec.ground.slope_direction = uniform(-std::numbers::pi, std::numbers::pi);

  const int n = opt.min_boxes + static_cast<int>(unit(rng) * (opt.max_boxes - opt.min_boxes + 1));
  for (int attempts = 0; static_cast<int>(spec.obstacles.size()) < std::min(n, opt.max_boxes) && attempts < 200;
       ++attempts) {
    BoxSpec b;
    const double r = uniform(opt.min_range, opt.max_range);
    const double az = uniform(-std::numbers::pi, std::numbers::pi);
    b.center_x = r * std::cos(az);
    b.center_y = r * std::sin(az);
    b.length = uniform(3.5, 5.5);
    b.width = uniform(1.6, 2.2);
    b.height = uniform(1.4, 2.4);
    b.yaw = uniform(-std::numbers::pi, std::numbers::pi);
    b.clearance = opt.clearance;
    const bool clear = std::all_of(spec.obstacles.begin(), spec.obstacles.end(), [&](const BoxSpec& o) {
      return std::hypot(o.center_x - b.center_x, o.center_y - b.center_y) > 7.0;
    });
    if (clear) spec.obstacles.push_back(b);
  }
  return spec;
}

}  // namespace lod
