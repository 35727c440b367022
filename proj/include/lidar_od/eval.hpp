#pragma once

// Ground-truth alignment and detection-error statistics.
//
// GPS fixes are mapped to a local plane, rotated into the ego vehicle frame
// and compared with the nearest detected obstacle frame by frame.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lidar_od/core.hpp"

namespace lod {

inline constexpr double kEarthRadius = 6378137.0;  // WGS-84 equatorial, meters

// Wraps into (-pi, pi].
inline double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

struct EgoPose {
  double X = 0.0;
  double Y = 0.0;
  double psi = 0.0;  // heading, CCW from absolute +X
};

struct PlanePoint {
  double X = 0.0;
  double Y = 0.0;
};

struct RelativePosition {
  double x_loc = 0.0;  // longitudinal
  double y_loc = 0.0;  // lateral
};

// Equirectangular projection around a reference fix. Exactly linear in the
// angle deltas; adequate for sub-kilometer baselines.
inline PlanePoint geodetic_to_plane(double lat, double lon, double ref_lat, double ref_lon) {
  if (!std::isfinite(lat) || std::abs(lat) > 90.0 || !std::isfinite(ref_lat) ||
      std::abs(ref_lat) > 90.0) {
    throw Error(ErrorCode::kInvalidLatitude,
                "latitude out of range: " + std::to_string(lat) + " (ref " + std::to_string(ref_lat) + ")");
  }
  if (!std::isfinite(lon) || !std::isfinite(ref_lon)) {
    throw Error(ErrorCode::kInvalidLatitude, "non-finite longitude");
  }
  constexpr double kDeg = std::numbers::pi / 180.0;
  return {kEarthRadius * (lon - ref_lon) * kDeg * std::cos(ref_lat * kDeg),
          kEarthRadius * (lat - ref_lat) * kDeg};
}

// Rotates the absolute target-minus-ego delta clockwise by the ego heading:
//   [x_loc]   [ cos psi  sin psi] [dX]
//   [y_loc] = [-sin psi  cos psi] [dY]
inline RelativePosition transform_to_local(const EgoPose& ego, double target_X, double target_Y) {
  const double dx = target_X - ego.X;
  const double dy = target_Y - ego.Y;
  const double c = std::cos(ego.psi);
  const double s = std::sin(ego.psi);
  return {c * dx + s * dy, -s * dx + c * dy};
}

// Moves an antenna fix to the reference point it stands for. (dx, dy) is the
// reference point relative to the antenna, in the target's own frame.
inline PlanePoint apply_lever_arm(const PlanePoint& antenna, double target_psi, double dx, double dy) {
  const double c = std::cos(target_psi);
  const double s = std::sin(target_psi);
  return {antenna.X + c * dx - s * dy, antenna.Y + s * dx + c * dy};
}

// Nearest estimate center within the gate, if any.
inline std::optional<ObstacleEstimate> associate(std::span<const ObstacleEstimate> estimates,
                                                 const RelativePosition& gt, double gate) {
  if (!(gate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "association gate must be > 0");
  const ObstacleEstimate* best = nullptr;
  double best_d = 0.0;
  for (const ObstacleEstimate& e : estimates) {
    const double d = std::hypot(e.center_x - gt.x_loc, e.center_y - gt.y_loc);
    if (d > gate) continue;
    if (best == nullptr || d < best_d) {
      best = &e;
      best_d = d;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

enum class Axis { kLongitudinal, kLateral };

inline std::string_view to_string(Axis a) {
  return a == Axis::kLongitudinal ? "longitudinal" : "lateral";
}

struct MatchedPair {
  ObstacleEstimate estimate;
  RelativePosition gt;
};

struct OffsetStats {
  double mean_offset = 0.0;  // mean of (estimate - truth)
  double std_dev = 0.0;      // population
  std::size_t sample_count = 0;
  double availability = 0.0;
};

struct DimensionStats {
  double mean_length = 0.0;
  double std_length = 0.0;
  double mean_width = 0.0;
  double std_width = 0.0;
};

namespace detail {

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;
};

inline MeanStd population_mean_std(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace detail

inline OffsetStats offset_stats(std::span<const MatchedPair> matched, Axis axis, std::size_t total_frames) {
  if (matched.empty()) throw Error(ErrorCode::kEmptySeries, "no matched estimate/truth pairs");
  if (total_frames < matched.size()) {
    throw Error(ErrorCode::kInvalidConfig, "total_frames is smaller than the number of matches");
  }
  std::vector<double> err;
  err.reserve(matched.size());
  for (const MatchedPair& m : matched) {
    err.push_back(axis == Axis::kLongitudinal ? m.estimate.center_x - m.gt.x_loc
                                              : m.estimate.center_y - m.gt.y_loc);
  }
  const auto ms = detail::population_mean_std(err);
  return {ms.mean, ms.std_dev, matched.size(),
          static_cast<double>(matched.size()) / static_cast<double>(total_frames)};
}

inline DimensionStats dimension_stats(std::span<const ObstacleEstimate> estimates) {
  if (estimates.empty()) throw Error(ErrorCode::kEmptySeries, "no estimates for dimension statistics");
  std::vector<double> len, wid;
  for (const ObstacleEstimate& e : estimates) {
    len.push_back(e.length);
    wid.push_back(e.width);
  }
  const auto l = detail::population_mean_std(len);
  const auto w = detail::population_mean_std(wid);
  return {l.mean, l.std_dev, w.mean, w.std_dev};
}

// ---------------------------------------------------------------------------
// Time-series harness.

struct TimedFix {
  double t = 0.0;
  PlanePoint pos;
  std::optional<double> psi;  // target heading, when logged
};

struct TimedPose {
  double t = 0.0;
  EgoPose pose;
};

struct TimedEstimates {
  double t = 0.0;
  std::vector<ObstacleEstimate> obstacles;
};

// Linear interpolation of a time-ordered series; nullopt outside its span.
inline std::optional<TimedFix> interpolate(std::span<const TimedFix> series, double t) {
  if (series.empty() || t < series.front().t || t > series.back().t) return std::nullopt;
  auto hi = std::lower_bound(series.begin(), series.end(), t,
                             [](const TimedFix& f, double v) { return f.t < v; });
  if (hi->t == t) return *hi;
  auto lo = hi - 1;
  const double a = (t - lo->t) / (hi->t - lo->t);
  TimedFix f;
  f.t = t;
  f.pos = {lo->pos.X + a * (hi->pos.X - lo->pos.X), lo->pos.Y + a * (hi->pos.Y - lo->pos.Y)};
  if (lo->psi && hi->psi) f.psi = normalize_angle(*lo->psi + a * normalize_angle(*hi->psi - *lo->psi));
  return f;
}

struct EvalParams {
  double gate = 5.0;
  double lever_dx = 0.0;
  double lever_dy = 0.0;
  double time_tolerance = 1e-3;  // seconds between a frame and its estimates
};

struct ComparisonRow {
  double t = 0.0;
  RelativePosition gt;
  std::optional<RelativePosition> est;
};

struct EvalReport {
  std::vector<ComparisonRow> rows;
  std::vector<MatchedPair> matched;
  std::optional<OffsetStats> longitudinal;
  std::optional<OffsetStats> lateral;
  std::optional<DimensionStats> dimensions;
};

// One frame per ego pose sample. Truth is interpolated to the frame time and
// corrected by the lever arm (target heading from the fix, else the ego's);
// estimates are taken from the estimate frame within `time_tolerance`.
inline EvalReport evaluate_series(std::span<const TimedEstimates> estimates,
                                  std::span<const TimedFix> truth, std::span<const TimedPose> ego,
                                  const EvalParams& params) {
  auto ordered = [](auto span) {
    return std::is_sorted(span.begin(), span.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  };
  if (!ordered(estimates) || !ordered(truth) || !ordered(ego)) {
    throw Error(ErrorCode::kSchemaError, "input series must be time-ordered");
  }

  EvalReport report;
  for (const TimedPose& frame : ego) {
    const auto fix = interpolate(truth, frame.t);
    if (!fix) continue;
    const double target_psi = fix->psi.value_or(frame.pose.psi);
    const PlanePoint ref = apply_lever_arm(fix->pos, target_psi, params.lever_dx, params.lever_dy);

    ComparisonRow row;
    row.t = frame.t;
    row.gt = transform_to_local(frame.pose, ref.X, ref.Y);

    auto it = std::lower_bound(estimates.begin(), estimates.end(), frame.t - params.time_tolerance,
                               [](const TimedEstimates& e, double v) { return e.t < v; });
    if (it != estimates.end() && std::abs(it->t - frame.t) <= params.time_tolerance) {
      if (auto hit = associate(it->obstacles, row.gt, params.gate)) {
        row.est = RelativePosition{hit->center_x, hit->center_y};
        report.matched.push_back({*hit, row.gt});
      }
    }
    report.rows.push_back(row);
  }

  if (!report.matched.empty()) {
    report.longitudinal = offset_stats(report.matched, Axis::kLongitudinal, report.rows.size());
    report.lateral = offset_stats(report.matched, Axis::kLateral, report.rows.size());
    std::vector<ObstacleEstimate> hits;
    for (const MatchedPair& m : report.matched) hits.push_back(m.estimate);
    report.dimensions = dimension_stats(hits);
  }
  return report;
}

}  // namespace lod
