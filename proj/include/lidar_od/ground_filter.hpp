#pragma once

// Road-surface removal: single-plane RANSAC with a tilt guard.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "lidar_od/core.hpp"

namespace lod {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& v) { return {s * v.x, s * v.y, s * v.z}; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline Vec3 to_vec(const Point3& p) { return {p.x, p.y, p.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

// Plane n.p + offset = 0 with unit normal pointing up (n.z > 0).
struct PlaneModel {
  Vec3 normal{0.0, 0.0, 1.0};
  double offset = 0.0;
  std::size_t inlier_count = 0;
  double inlier_ratio = 0.0;

  double signed_distance(const Point3& p) const {
    return normal.x * p.x + normal.y * p.y + normal.z * p.z + offset;
  }
};

struct RansacParams {
  int max_iterations = 100;
  double distance_threshold = 0.15;
  double min_inlier_ratio = 0.2;
  std::uint64_t rng_seed = 42;
  double max_plane_tilt = 15.0 * std::numbers::pi / 180.0;
};

namespace detail {

// Plane through three points, oriented upward. Returns false when the points
// are (numerically) collinear.
inline bool plane_from_triple(const Point3& a, const Point3& b, const Point3& c,
                              PlaneModel& out) {
  const Vec3 pa = to_vec(a);
  Vec3 n = cross(to_vec(b) - pa, to_vec(c) - pa);
  const double len = n.norm();
  if (!(len > 1e-12)) return false;
  n = (1.0 / len) * n;
  if (n.z < 0.0) n = -1.0 * n;
  out.normal = n;
  out.offset = -dot(n, pa);
  return true;
}

inline std::size_t count_inliers(std::span<const Point3> points, const PlaneModel& plane,
                                 double threshold) {
  std::size_t count = 0;
  const double nx = plane.normal.x, ny = plane.normal.y, nz = plane.normal.z, d = plane.offset;
  for (const Point3& p : points) {
    count += std::abs(nx * p.x + ny * p.y + nz * p.z + d) <= threshold ? 1u : 0u;
  }
  return count;
}

inline bool all_collinear(std::span<const Point3> points) {
  // Find two distinct points, then any third off their line.
  const Point3& a = points[0];
  std::size_t j = 1;
  while (j < points.size() && (to_vec(points[j]) - to_vec(a)).norm() <= 1e-12) ++j;
  if (j == points.size()) return true;
  const Vec3 ab = to_vec(points[j]) - to_vec(a);
  for (std::size_t k = j + 1; k < points.size(); ++k) {
    if (cross(ab, to_vec(points[k]) - to_vec(a)).norm() > 1e-12 * (1.0 + ab.norm())) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// Fits the dominant upward-facing plane. Deterministic for a given seed: one
// mt19937_64 stream drives every triple draw.
inline PlaneModel fit_plane_ransac(std::span<const Point3> points, const RansacParams& params) {
  if (params.max_iterations < 1 || !(params.distance_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "ransac needs max_iterations >= 1 and threshold > 0");
  }
  if (points.size() < 3) {
    throw Error(ErrorCode::kDegenerateInput,
                "plane fit needs at least 3 points, got " + std::to_string(points.size()));
  }
  if (detail::all_collinear(points)) {
    throw Error(ErrorCode::kDegenerateInput, "all points are collinear");
  }

  const double min_normal_z = std::cos(params.max_plane_tilt);
  std::mt19937_64 rng(params.rng_seed);
  const auto n = static_cast<std::uint64_t>(points.size());
  std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);

  PlaneModel best;
  bool found = false;
  for (int it = 0; it < params.max_iterations; ++it) {
    std::uint64_t i = pick(rng), j = pick(rng), k = pick(rng);
    while (j == i) j = pick(rng);
    while (k == i || k == j) k = pick(rng);

    PlaneModel candidate;
    if (!detail::plane_from_triple(points[i], points[j], points[k], candidate)) continue;
    if (candidate.normal.z < min_normal_z) continue;

    candidate.inlier_count = detail::count_inliers(points, candidate, params.distance_threshold);
    if (!found || candidate.inlier_count > best.inlier_count) {
      best = candidate;
      found = true;
    }
  }

  if (!found) {
    throw Error(ErrorCode::kNoPlaneFound, "no candidate plane within the tilt limit");
  }
  best.inlier_ratio = static_cast<double>(best.inlier_count) / static_cast<double>(points.size());
  if (best.inlier_ratio < params.min_inlier_ratio) {
    throw Error(ErrorCode::kNoPlaneFound,
                "best plane has inlier ratio " + std::to_string(best.inlier_ratio) +
                    " below " + std::to_string(params.min_inlier_ratio));
  }
  return best;
}

struct GroundSplit {
  std::vector<Point3> ground;
  std::vector<Point3> non_ground;
};

// A point is ground iff its distance to the plane is within the threshold.
inline GroundSplit split_ground(std::span<const Point3> points, const PlaneModel& plane,
                                double distance_threshold) {
  GroundSplit out;
  out.ground.reserve(points.size());
  out.non_ground.reserve(points.size() / 4);
  for (const Point3& p : points) {
    if (std::abs(plane.signed_distance(p)) <= distance_threshold) {
      out.ground.push_back(p);
    } else {
      out.non_ground.push_back(p);
    }
  }
  return out;
}

}  // namespace lod
