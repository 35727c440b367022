#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "lidar_od/pipeline.hpp"

using namespace lod;

namespace {

// Flat road at z = -1.73 on a 0.1 m lattice plus boxes sampled throughout
// their volume, as a sensor with full coverage of each box would see them.
PointCloudFrame volumetric_scene(const std::vector<BoxSpec>& boxes, double step = 0.1, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.02);
  PointCloudFrame f;
  for (double x = -20.0; x < 25.0; x += 0.1)
    for (double y = -10.0; y < 10.0; y += 0.1) f.points.push_back({x, y, -1.73 + noise(rng), 0.5});
  for (const BoxSpec& b : boxes) {
    for (double u = -0.5 * b.length; u <= 0.5 * b.length; u += step)
      for (double v = -0.5 * b.width; v <= 0.5 * b.width; v += step)
        for (double h = 0.3; h <= b.height; h += 0.25)
          f.points.push_back({b.center_x + u, b.center_y + v, -1.73 + b.clearance + h, 0.8});
  }
  return f;
}

std::vector<std::string> stage_names(const PipelineResult& r) {
  std::vector<std::string> v;
  for (const auto& t : r.timings) v.push_back(t.stage);
  return v;
}

}  // namespace

TEST(RunGeometric, GroundOnlySceneHasNoObstacles) {
  SceneSpec s;
  const auto f = generate_frame(s);
  const auto r = run_geometric(f.frame, PipelineConfig::defaults());
  EXPECT_TRUE(r.obstacles.empty());
  EXPECT_NEAR(r.ground_plane.offset, 1.73, 0.05);
}

TEST(RunGeometric, StageTimings) {
  const auto cfg = PipelineConfig::defaults();
  const auto r = run_geometric(generate_frame(cfg.synth.scene).frame, cfg);
  const std::vector<std::string> expected{"validate",  "ground_fit",    "ground_split", "projection", "occupancy",
                                          "morphology", "labeling", "extraction",   "total"};
  EXPECT_EQ(stage_names(r), expected);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < r.timings.size(); ++i) {
    EXPECT_GE(r.timings[i].ms, 0.0);
    sum += r.timings[i].ms;
  }
  EXPECT_NEAR(r.timings.back().ms, sum, 1e-9);
}

TEST(RunGeometric, VolumetricVanRecovered) {
  const BoxSpec van{10.0, 0.0, 5.0, 2.0, 2.0};
  const auto r = run_geometric(volumetric_scene({van}), PipelineConfig::defaults());
  ASSERT_EQ(r.obstacles.size(), 1u);
  const auto& o = r.obstacles[0];
  EXPECT_LE(std::hypot(o.center_x - 10.0, o.center_y), 0.43);
  EXPECT_GE(o.length, 4.5);
  EXPECT_LE(o.length, 5.7);
  EXPECT_GE(o.width, 1.8);
  EXPECT_LE(o.width, 2.4);
}

TEST(RunGeometric, TwoBoxesFiveMetersApart) {
  const BoxSpec a{10.0, -2.5, 4.0, 1.8, 1.6};
  const BoxSpec b{10.0, 2.5, 4.0, 1.8, 1.6};
  const auto r = run_geometric(volumetric_scene({a, b}), PipelineConfig::defaults());
  ASSERT_EQ(r.obstacles.size(), 2u);
  const bool a_first = r.obstacles[0].center_y < r.obstacles[1].center_y;
  EXPECT_NEAR(r.obstacles[a_first ? 0 : 1].center_y, -2.5, 0.43);
  EXPECT_NEAR(r.obstacles[a_first ? 1 : 0].center_y, 2.5, 0.43);
}

TEST(RunGeometric, DroppedPointsReported) {
  auto f = volumetric_scene({});
  f.points.push_back({std::nan(""), 0, 0, 0});
  EXPECT_EQ(run_geometric(f, PipelineConfig::defaults()).dropped_points, 1u);
}

TEST(RunGeometric, PropagatesStageErrors) {
  PointCloudFrame empty;
  try {
    run_geometric(empty, PipelineConfig::defaults());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyFrame);
  }
  PointCloudFrame wall;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) wall.points.push_back({5.0, 0.2 * i, 0.2 * j, 0.5});
  try {
    run_geometric(wall, PipelineConfig::defaults());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoPlaneFound);
  }
}

TEST(RunBev, FootprintDetectorGivesTruth) {
  auto cfg = PipelineConfig::defaults();
  const auto& scene = cfg.synth.scene;
  FootprintDetector det(scene.obstacles);
  const auto r = run_bev(generate_frame(scene).frame, cfg, det);
  ASSERT_EQ(r.obstacles.size(), 1u);
  const double cell = cfg.bev.geometry.cell_size();
  EXPECT_NEAR(r.obstacles[0].center_x, 10.0, 1e-4);
  EXPECT_NEAR(r.obstacles[0].length, 5.0, cell);
  EXPECT_NEAR(r.obstacles[0].width, 2.0, cell);
  const std::vector<std::string> expected{"validate", "ground_fit", "ground_split", "channels",
                                          "detector", "clustering", "postprocess",  "total"};
  EXPECT_EQ(stage_names(r), expected);
}

TEST(RunBev, HeightDetectorSeesVolumetricVan) {
  auto cfg = PipelineConfig::defaults();
  HeightThresholdDetector det(cfg.bev.detector_min_height);
  const auto r = run_bev(volumetric_scene({{10.0, 0.0, 5.0, 2.0, 2.0}}, 0.05), cfg, det);
  ASSERT_EQ(r.obstacles.size(), 1u);
  EXPECT_NEAR(r.obstacles[0].center_x, 10.0, 0.1);
  EXPECT_NEAR(r.obstacles[0].length, 5.0, 2 * cfg.bev.geometry.cell_size());
}

TEST(RunBev, GroundOnly) {
  auto cfg = PipelineConfig::defaults();
  HeightThresholdDetector det;
  EXPECT_TRUE(run_bev(generate_frame(SceneSpec{}).frame, cfg, det).obstacles.empty());
}

TEST(RunBev, MismatchedDetectorOutput) {
  struct Wrong : Detector {
    OutputAttributeGrid detect(const ChannelImage&) override {
      BevConfig other;
      other.image_size = 10;
      return OutputAttributeGrid::zeros(other);
    }
  } det;
  try {
    run_bev(generate_frame(SceneSpec{}).frame, PipelineConfig::defaults(), det);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kGeometryMismatch);
  }
}

TEST(Percentile, NearestRank) {
  EXPECT_DOUBLE_EQ(percentile({5, 1, 4, 2, 3}, 0.95), 5.0);
  EXPECT_DOUBLE_EQ(percentile({5, 1, 4, 2, 3}, 0.5), 3.0);
  std::vector<double> v;
  for (int i = 1; i <= 100; ++i) v.push_back(i);
  EXPECT_DOUBLE_EQ(percentile(v, 0.95), 95.0);
  EXPECT_DOUBLE_EQ(percentile({}, 0.95), 0.0);
}

TEST(Bench, ReportSchema) {
  auto cfg = PipelineConfig::defaults();
  cfg.bench.azimuth_resolution_deg = 0.4;
  const auto rep = bench(cfg, 3);
  EXPECT_EQ(rep.frames, 3u);
  ASSERT_EQ(rep.stages.size(), 9u);
  EXPECT_EQ(rep.stages.front().stage, "validate");
  EXPECT_EQ(rep.total().stage, "total");
  for (const auto& s : rep.stages) {
    EXPECT_LE(s.mean_ms, s.max_ms + 1e-12);
    EXPECT_LE(s.p95_ms, s.max_ms);
  }
  EXPECT_GT(rep.achieved_hz, 0.0);
  EXPECT_GT(rep.mean_points, 1000.0);
  std::ostringstream os;
  write_bench_csv(os, rep);
  const std::string csv = os.str();
  EXPECT_EQ(csv.substr(0, 28), "stage,mean_ms,p95_ms,max_ms\n");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
}

TEST(Bench, NeedsAFrame) {
  EXPECT_THROW(bench(PipelineConfig::defaults(), 0), Error);
}

TEST(Bench, DefaultFrameSize) {
  const auto cfg = PipelineConfig::defaults();
  SceneSpec s = cfg.synth.scene;
  s.sensor.azimuth_resolution_deg = cfg.bench.azimuth_resolution_deg;
  const auto n = generate_frame(s).frame.points.size();
  EXPECT_GT(n, 26000u);
  EXPECT_LT(n, 30000u);
}
