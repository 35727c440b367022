#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>
#include <string_view>

#include "lidar_od/core.hpp"

using namespace lod;

namespace {

PointCloudFrame frame_of(std::vector<Point3> pts) {
  PointCloudFrame f;
  f.points = std::move(pts);
  f.frame_id = 7;
  f.timestamp = 1.5;
  return f;
}

}  // namespace

TEST(ValidateFrame, KeepsFinitePoints) {
  const auto v = validate_frame(frame_of({{1, 2, 3, 0.1}, {4, 5, 6, 0.2}, {7, 8, 9, 0.3}}));
  EXPECT_EQ(v.frame.points.size(), 3u);
  EXPECT_EQ(v.dropped, 0u);
  EXPECT_EQ(v.frame.frame_id, 7);
  EXPECT_DOUBLE_EQ(v.frame.timestamp, 1.5);
}

TEST(ValidateFrame, DropsOneNaN) {
  std::vector<Point3> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({double(i), 0, 0, 0.5});
  pts[4].z = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate_frame(frame_of(pts));
  EXPECT_EQ(v.frame.points.size(), 9u);
  EXPECT_EQ(v.dropped, 1u);
  for (const auto& p : v.frame.points) EXPECT_NE(p.x, 4.0);
}

TEST(ValidateFrame, InfinityCountsAsNonFinite) {
  const double inf = std::numeric_limits<double>::infinity();
  const auto v = validate_frame(frame_of({{inf, 0, 0, 0}, {0, 0, 0, inf}, {1, 1, 1, 0}}));
  EXPECT_EQ(v.dropped, 2u);
}

TEST(ValidateFrame, AllNonFiniteIsEmptyFrame) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    validate_frame(frame_of({{nan, 0, 0, 0}, {0, nan, 0, 0}}));
    FAIL() << "expected EmptyFrame";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyFrame);
  }
}

TEST(ValidateFrame, EmptyInputIsEmptyFrame) {
  EXPECT_THROW(validate_frame(frame_of({})), Error);
}

TEST(ValidateFrame, RawIntensityIsScaled) {
  auto f = frame_of({{0, 0, 0, 255}, {0, 0, 0, 51}, {0, 0, 0, 0}});
  f.intensity_encoding = IntensityEncoding::kRaw8Bit;
  const auto v = validate_frame(f);
  EXPECT_DOUBLE_EQ(v.frame.points[0].intensity, 1.0);
  EXPECT_DOUBLE_EQ(v.frame.points[1].intensity, 0.2);
  EXPECT_DOUBLE_EQ(v.frame.points[2].intensity, 0.0);
  EXPECT_EQ(v.frame.intensity_encoding, IntensityEncoding::kNormalized);
}

TEST(ValidateFrame, IntensityClampedToUnitInterval) {
  const auto v = validate_frame(frame_of({{0, 0, 0, 1.7}, {0, 0, 0, -0.3}}));
  EXPECT_DOUBLE_EQ(v.frame.points[0].intensity, 1.0);
  EXPECT_DOUBLE_EQ(v.frame.points[1].intensity, 0.0);
}

TEST(RangeOf, HorizontalDistanceOnly) {
  EXPECT_DOUBLE_EQ(range_of({3, 4, 1, 0}), 5.0);
  EXPECT_DOUBLE_EQ(range_of({0, 0, 2, 0}), 0.0);
  EXPECT_DOUBLE_EQ(range_of({-6, 8, 0, 0}), 10.0);
}

TEST(MakeObstacle, DerivesRange) {
  const auto o = make_obstacle(6, -8, 4, 2, 1.5, 0.7, "car");
  EXPECT_DOUBLE_EQ(o.range, 10.0);
  EXPECT_EQ(o.class_tag, "car");
  ASSERT_TRUE(o.height.has_value());
  EXPECT_DOUBLE_EQ(*o.height, 1.5);
  EXPECT_FALSE(make_obstacle(1, 1, 1, 1).height.has_value());
}

TEST(ErrorCode, NamesAreDistinct) {
  std::set<std::string_view> names;
  for (auto c : {ErrorCode::kEmptyFrame, ErrorCode::kDegenerateInput, ErrorCode::kNoPlaneFound,
                 ErrorCode::kDimensionMismatch, ErrorCode::kGeometryMismatch, ErrorCode::kInvalidLatitude,
                 ErrorCode::kEmptySeries, ErrorCode::kParseError, ErrorCode::kUnsupportedLayout,
                 ErrorCode::kSchemaError, ErrorCode::kInvalidConfig, ErrorCode::kIoError}) {
    names.insert(to_string(c));
  }
  EXPECT_EQ(names.size(), 12u);
  EXPECT_EQ(to_string(ErrorCode::kEmptyFrame), "EmptyFrame");
}
