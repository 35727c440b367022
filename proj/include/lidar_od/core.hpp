#pragma once

// Shared domain types for the obstacle detection pipelines.
//
// Frame convention: right-handed vehicle frame, x forward, y left, z up,
// sensor at the origin. All lengths are meters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lod {

enum class ErrorCode {
  kEmptyFrame,
  kDegenerateInput,
  kNoPlaneFound,
  kDimensionMismatch,
  kGeometryMismatch,
  kInvalidLatitude,
  kEmptySeries,
  kParseError,
  kUnsupportedLayout,
  kSchemaError,
  kInvalidConfig,
  kIoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyFrame: return "EmptyFrame";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kNoPlaneFound: return "NoPlaneFound";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kGeometryMismatch: return "GeometryMismatch";
    case ErrorCode::kInvalidLatitude: return "InvalidLatitude";
    case ErrorCode::kEmptySeries: return "EmptySeries";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kUnsupportedLayout: return "UnsupportedLayout";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// Single exception type for every module; the code is the machine-readable
// category surfaced by the CLI.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

// How intensity values of a frame are encoded before validation.
enum class IntensityEncoding {
  kNormalized,  // already in [0, 1]
  kRaw8Bit,     // raw [0, 255]
};

struct PointCloudFrame {
  std::vector<Point3> points;
  double timestamp = 0.0;
  std::int64_t frame_id = 0;
  IntensityEncoding intensity_encoding = IntensityEncoding::kNormalized;
};

struct ValidatedFrame {
  PointCloudFrame frame;
  std::size_t dropped = 0;
};

struct ObstacleEstimate {
  double center_x = 0.0;
  double center_y = 0.0;
  double length = 0.0;
  double width = 0.0;
  std::optional<double> height;
  double confidence = 1.0;
  std::string class_tag = "unknown";
  double range = 0.0;
};

// Horizontal distance from the sensor axis; z does not contribute.
inline double range_of(const Point3& p) noexcept { return std::hypot(p.x, p.y); }

inline bool is_finite(const Point3& p) noexcept {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) &&
         std::isfinite(p.intensity);
}

// Builds an estimate with range derived from the center.
inline ObstacleEstimate make_obstacle(double cx, double cy, double length, double width,
                                      std::optional<double> height = std::nullopt,
                                      double confidence = 1.0,
                                      std::string class_tag = "unknown") {
  ObstacleEstimate o;
  o.center_x = cx;
  o.center_y = cy;
  o.length = length;
  o.width = width;
  o.height = height;
  o.confidence = confidence;
  o.class_tag = std::move(class_tag);
  o.range = std::hypot(cx, cy);
  return o;
}

// Drops non-finite points and normalizes intensity into [0, 1].
inline ValidatedFrame validate_frame(const PointCloudFrame& frame) {
  ValidatedFrame out;
  out.frame.timestamp = frame.timestamp;
  out.frame.frame_id = frame.frame_id;
  out.frame.intensity_encoding = IntensityEncoding::kNormalized;
  out.frame.points.reserve(frame.points.size());

  const double scale = frame.intensity_encoding == IntensityEncoding::kRaw8Bit ? 1.0 / 255.0 : 1.0;
  for (const Point3& p : frame.points) {
    if (!is_finite(p)) {
      ++out.dropped;
      continue;
    }
    Point3 q = p;
    q.intensity = std::clamp(p.intensity * scale, 0.0, 1.0);
    out.frame.points.push_back(q);
  }
  if (out.frame.points.empty()) {
    throw Error(ErrorCode::kEmptyFrame,
                "frame " + std::to_string(frame.frame_id) + " has no finite points");
  }
  return out;
}

}  // namespace lod
