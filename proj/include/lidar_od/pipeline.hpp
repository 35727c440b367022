#pragma once

// End-to-end pipelines with per-stage wall-clock timing, and the synthetic
// throughput benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "lidar_od/bev_features.hpp"
#include "lidar_od/cluster.hpp"
#include "lidar_od/config.hpp"
#include "lidar_od/core.hpp"
#include "lidar_od/ground_filter.hpp"
#include "lidar_od/grid.hpp"
#include "lidar_od/synth.hpp"

namespace lod {

struct StageTiming {
  std::string stage;
  double ms = 0.0;
};

class StageTimer {
 public:
  template <typename F>
  auto run(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(stage, t0);
    } else {
      auto result = f();
      record(stage, t0);
      return result;
    }
  }

  std::vector<StageTiming> finish() {
    double total = 0.0;
    for (const auto& s : timings_) total += s.ms;
    timings_.push_back({"total", total});
    return std::move(timings_);
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point t0) {
    const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    timings_.push_back({stage, dt.count()});
  }
  std::vector<StageTiming> timings_;
};

struct PipelineResult {
  std::vector<ObstacleEstimate> obstacles;
  PlaneModel ground_plane;
  std::size_t dropped_points = 0;
  std::vector<StageTiming> timings;  // in execution order, "total" last
};

// Non-ground points re-expressed with z as the signed height above the
// fitted plane, so the grid's height crop is relative to the road.
inline std::vector<Point3> heights_above_plane(const std::vector<Point3>& points, const PlaneModel& plane) {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const Point3& p : points) out.push_back({p.x, p.y, plane.signed_distance(p), p.intensity});
  return out;
}

inline PipelineResult run_geometric(const PointCloudFrame& frame, const PipelineConfig& cfg) {
  StageTimer timer;
  PipelineResult res;

  const ValidatedFrame valid = timer.run("validate", [&] { return validate_frame(frame); });
  res.dropped_points = valid.dropped;
  const auto& pts = valid.frame.points;
  res.ground_plane = timer.run("ground_fit", [&] { return fit_plane_ransac(pts, cfg.ground_filter); });
  const GroundSplit split = timer.run("ground_split", [&] {
    return split_ground(pts, res.ground_plane, cfg.ground_filter.distance_threshold);
  });
  const CellHistogram hist = timer.run("projection", [&] {
    return project_to_grid(heights_above_plane(split.non_ground, res.ground_plane), cfg.grid);
  });
  const OccupancyGrid occupied = timer.run("occupancy", [&] { return occupancy_from_counts(hist, cfg.thresholds); });
  const OccupancyGrid cleaned = timer.run("morphology", [&] {
    return morph_open_close(occupied, cfg.cluster.kernel_radius);
  });
  const LabelGrid labels = timer.run("labeling", [&] { return label_components(cleaned, cfg.cluster.connectivity); });
  res.obstacles = timer.run("extraction", [&] {
    return extract_obstacles(labels, hist, cfg.grid, cfg.cluster.min_cells);
  });
  res.timings = timer.finish();
  return res;
}

// Channel extraction runs on the non-ground points with heights above the
// fitted plane; the detector's output grid is then clustered and filtered.
inline PipelineResult run_bev(const PointCloudFrame& frame, const PipelineConfig& cfg, Detector& detector) {
  StageTimer timer;
  PipelineResult res;

  const ValidatedFrame valid = timer.run("validate", [&] { return validate_frame(frame); });
  res.dropped_points = valid.dropped;
  const auto& pts = valid.frame.points;
  res.ground_plane = timer.run("ground_fit", [&] { return fit_plane_ransac(pts, cfg.ground_filter); });
  const GroundSplit split = timer.run("ground_split", [&] {
    return split_ground(pts, res.ground_plane, cfg.ground_filter.distance_threshold);
  });
  const ChannelImage image = timer.run("channels", [&] {
    return extract_channels(heights_above_plane(split.non_ground, res.ground_plane), cfg.bev.geometry);
  });
  const OutputAttributeGrid attr = timer.run("detector", [&] { return detector.detect(image); });
  if (attr.geometry.image_size != image.geometry.image_size || !attr.consistent()) {
    throw Error(ErrorCode::kGeometryMismatch, "detector output does not match the input image geometry");
  }
  const auto clusters = timer.run("clustering", [&] {
    return cluster_output_grid(attr, cfg.bev.objectness_threshold, cfg.cluster.connectivity);
  });
  res.obstacles = timer.run("postprocess", [&] {
    return postprocess_clusters(clusters, cfg.bev.min_confidence, cfg.bev.geometry, cfg.bev.class_names);
  });
  res.timings = timer.finish();
  return res;
}

// ---------------------------------------------------------------------------
// Throughput benchmark.

struct StageStats {
  std::string stage;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
};

struct BenchReport {
  std::size_t frames = 0;
  double mean_points = 0.0;
  std::vector<StageStats> stages;  // pipeline stages, then "total"
  double achieved_hz = 0.0;        // 1000 / mean total latency

  const StageStats& total() const { return stages.back(); }
};

// Nearest-rank percentile.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

inline BenchReport summarize_timings(const std::vector<std::vector<StageTiming>>& runs, double mean_points) {
  BenchReport rep;
  rep.frames = runs.size();
  rep.mean_points = mean_points;
  if (runs.empty()) return rep;
  for (std::size_t s = 0; s < runs.front().size(); ++s) {
    std::vector<double> v;
    for (const auto& run : runs) v.push_back(run[s].ms);
    double sum = 0.0;
    for (double x : v) sum += x;
    rep.stages.push_back({runs.front()[s].stage, sum / static_cast<double>(v.size()), percentile(v, 0.95),
                          *std::max_element(v.begin(), v.end())});
  }
  rep.achieved_hz = rep.total().mean_ms > 0.0 ? 1000.0 / rep.total().mean_ms : 0.0;
  return rep;
}

// Generates `n_frames` frames of the configured scene at the bench azimuth
// resolution and times the geometric pipeline on each. Frame generation is
// not timed.
inline BenchReport bench(const PipelineConfig& cfg, std::size_t n_frames) {
  if (n_frames < 1) throw Error(ErrorCode::kInvalidConfig, "bench needs at least one frame");
  SceneSpec base = cfg.synth.scene;
  base.sensor.azimuth_resolution_deg = cfg.bench.azimuth_resolution_deg;

  std::vector<std::vector<StageTiming>> runs;
  double points = 0.0;
  for (std::size_t i = 0; i < n_frames; ++i) {
    const auto id = static_cast<std::int64_t>(i);
    const LabeledFrame f = generate_frame(scene_at(base, static_cast<double>(i) * cfg.frame_period, id));
    points += static_cast<double>(f.frame.points.size());
    runs.push_back(run_geometric(f.frame, cfg).timings);
  }
  return summarize_timings(runs, points / static_cast<double>(n_frames));
}

inline void write_bench_csv(std::ostream& os, const BenchReport& rep) {
  os << "stage,mean_ms,p95_ms,max_ms\n";
  for (const StageStats& s : rep.stages) {
    os << s.stage << ',' << format_double(s.mean_ms) << ',' << format_double(s.p95_ms) << ','
       << format_double(s.max_ms) << '\n';
  }
}

}  // namespace lod
