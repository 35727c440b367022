// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lidar_od/eval.hpp"
#include "lidar_od/io.hpp"
#include "lidar_od/pipeline.hpp"
#include "oracles.hpp"

using namespace lod;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Gap left under every random box, as under a road vehicle. Flush boxes put
// their lowest 0.15 m of face points inside the ground band by construction.
constexpr double kVehicleClearance = 0.2;

struct GroundRemovalStats {
  double recall = 0.0, leakage = 0.0, mean_ms = 0.0, max_ms = 0.0, mean_points = 0.0;
};

GroundRemovalStats measure_ground_removal(double clearance, const RansacParams& params) {
  SensorSpec sensor;
  sensor.azimuth_resolution_deg = 0.1;
  RandomSceneOptions opt;
  opt.clearance = clearance;
  std::size_t ground = 0, ground_kept = 0, obstacle = 0, leaked = 0, points = 0;
  double total_ms = 0.0, max_ms = 0.0;
  constexpr int kScenes = 100;
  for (int i = 0; i < kScenes; ++i) {
    const LabeledFrame f = generate_frame(random_scene(1000 + static_cast<std::uint64_t>(i), opt, sensor));
    const auto t0 = Clock::now();
    const PlaneModel plane = fit_plane_ransac(f.frame.points, params);
    const GroundSplit split = split_ground(f.frame.points, plane, params.distance_threshold);
    const double ms = ms_since(t0);
    total_ms += ms;
    max_ms = std::max(max_ms, ms);
    points += f.frame.points.size();
    (void)split;
    for (std::size_t k = 0; k < f.frame.points.size(); ++k) {
      const bool is_ground = std::abs(plane.signed_distance(f.frame.points[k])) <= params.distance_threshold;
      if (f.labels[k] == kGroundLabel) {
        ++ground;
        ground_kept += is_ground;
      } else {
        ++obstacle;
        leaked += is_ground;
      }
    }
  }
  return {static_cast<double>(ground_kept) / static_cast<double>(ground),
          static_cast<double>(leaked) / static_cast<double>(obstacle), total_ms / kScenes, max_ms,
          static_cast<double>(points) / kScenes};
}

Outcome ground_removal() {
  Outcome o;
  const auto params = PipelineConfig::defaults().ground_filter;
  const auto s = measure_ground_removal(kVehicleClearance, params);
  o.require(s.recall >= 0.99, fmt("recall %.5f < 0.99", s.recall));
  o.require(s.leakage <= 0.01, fmt("leakage %.5f > 0.01", s.leakage));
  o.require(s.mean_ms < 10.0, fmt("mean runtime %.2f ms >= 10", s.mean_ms));
  o.note(fmt("recall %.5f, leakage %.5f, %.2f ms mean / %.2f ms max", s.recall, s.leakage, s.mean_ms, s.max_ms) +
         fmt(", %.0f points/frame, clearance %.2f m", s.mean_points, kVehicleClearance));
  const auto flush = measure_ground_removal(0.0, params);
  o.note(fmt("flush boxes (info): leakage %.5f", flush.leakage));
  return o;
}

Outcome labeling_oracle() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> density(0.1, 0.8);
  int grids = 0, mismatches = 0;
  for (std::size_t side : {20u, 50u}) {
    for (int i = 0; i < 500; ++i) {
      const OccupancyGrid g = oracle::random_grid(rng, side, side, density(rng));
      ++grids;
      for (bool eight : {false, true}) {
        int count = 0;
        const auto ref = oracle::flood_fill_labels(g, eight, count);
        const LabelGrid got = label_components(g, eight ? Connectivity::kEight : Connectivity::kFour);
        const bool same = got.num_components == static_cast<std::uint32_t>(count) &&
                          oracle::same_partition(got.labels, ref, g.size());
        mismatches += !same;
      }
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " labelings differ from flood fill");
  o.note(std::to_string(grids) + " grids x 2 connectivities");
  return o;
}

Outcome end_to_end_van() {
  Outcome o;
  const PipelineConfig cfg = PipelineConfig::defaults();
  const LabeledFrame f = generate_frame(cfg.synth.scene);
  const PipelineResult res = run_geometric(f.frame, cfg);
  const BoxSpec& van = cfg.synth.scene.obstacles.at(0);
  o.note(std::to_string(f.frame.points.size()) + " points, " + std::to_string(res.obstacles.size()) +
         " obstacle(s)");
  o.require(res.obstacles.size() == 1, "expected exactly 1 obstacle");
  if (!res.obstacles.empty()) {
    const ObstacleEstimate& e = res.obstacles.front();
    const double err = std::hypot(e.center_x - van.center_x, e.center_y - van.center_y);
    o.note(fmt("first: center (%.3f, %.3f) length %.2f width %.2f", e.center_x, e.center_y, e.length, e.width));
    o.require(err <= 0.45, fmt("centroid error %.3f > 0.45", err));
    o.require(e.length >= 4.5 && e.length <= 5.7, fmt("length %.2f outside [4.5, 5.7]", e.length));
    o.require(e.width >= 1.8 && e.width <= 2.4, fmt("width %.2f outside [1.8, 2.4]", e.width));
  }
  return o;
}

Outcome transform_properties() {
  Outcome o;
  constexpr double kTol = 1e-9;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-1000.0, 1000.0), ang(-std::numbers::pi, std::numbers::pi);
  double worst_identity = 0.0, worst_norm = 0.0, worst_inverse = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double X = pos(rng), Y = pos(rng);
    const auto id = transform_to_local({0.0, 0.0, 0.0}, X, Y);
    worst_identity = std::max({worst_identity, std::abs(id.x_loc - X), std::abs(id.y_loc - Y)});

    const EgoPose ego{pos(rng), pos(rng), ang(rng)};
    const auto loc = transform_to_local(ego, X, Y);
    worst_norm = std::max(worst_norm, std::abs(std::hypot(loc.x_loc, loc.y_loc) - std::hypot(X - ego.X, Y - ego.Y)));
    const double c = std::cos(ego.psi), s = std::sin(ego.psi);
    const double bx = ego.X + c * loc.x_loc - s * loc.y_loc;
    const double by = ego.Y + s * loc.x_loc + c * loc.y_loc;
    worst_inverse = std::max({worst_inverse, std::abs(bx - X), std::abs(by - Y)});
  }
  const auto q = transform_to_local({0.0, 0.0, std::numbers::pi / 2}, 1.0, 0.0);
  const double quarter = std::max(std::abs(q.x_loc), std::abs(q.y_loc + 1.0));
  o.require(worst_identity <= kTol, fmt("identity error %.3g", worst_identity));
  o.require(quarter <= kTol, fmt("quarter turn error %.3g", quarter));
  o.require(worst_norm <= kTol, fmt("norm error %.3g", worst_norm));
  o.require(worst_inverse <= kTol, fmt("round trip error %.3g", worst_inverse));
  o.note(fmt("10000 samples, max errors identity %.2g, quarter turn %.2g, norm %.2g, round trip %.2g",
             worst_identity, quarter, worst_norm, worst_inverse));
  return o;
}

Outcome metrics() {
  Outcome o;
  constexpr double kTol = 1e-12;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 300), extra(0, 100);
  std::normal_distribution<double> err(0.5, 1.5), dim(4.0, 0.6);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = len(rng);
    const std::size_t total = static_cast<std::size_t>(n + extra(rng));
    std::vector<MatchedPair> pairs;
    std::vector<ObstacleEstimate> ests;
    std::vector<double> ex, ey, el, ew;
    for (int k = 0; k < n; ++k) {
      MatchedPair m;
      m.gt = {10.0 + err(rng), err(rng)};
      m.estimate = make_obstacle(m.gt.x_loc + err(rng), m.gt.y_loc + err(rng), dim(rng), dim(rng) / 2.0);
      ex.push_back(m.estimate.center_x - m.gt.x_loc);
      ey.push_back(m.estimate.center_y - m.gt.y_loc);
      el.push_back(m.estimate.length);
      ew.push_back(m.estimate.width);
      ests.push_back(m.estimate);
      pairs.push_back(std::move(m));
    }
    const auto lon = offset_stats(pairs, Axis::kLongitudinal, total);
    const auto lat = offset_stats(pairs, Axis::kLateral, total);
    const auto d = dimension_stats(ests);
    const auto [mx, sx] = oracle::mean_std(ex);
    const auto [my, sy] = oracle::mean_std(ey);
    const auto [ml, sl] = oracle::mean_std(el);
    const auto [mw, sw] = oracle::mean_std(ew);
    const double avail = static_cast<double>(n) / static_cast<double>(total);
    worst = std::max({worst, std::abs(lon.mean_offset - mx), std::abs(lon.std_dev - sx),
                      std::abs(lat.mean_offset - my), std::abs(lat.std_dev - sy), std::abs(lon.availability - avail),
                      std::abs(lat.availability - avail), std::abs(d.mean_length - ml), std::abs(d.std_length - sl),
                      std::abs(d.mean_width - mw), std::abs(d.std_width - sw)});
    o.require(lon.sample_count == static_cast<std::size_t>(n), "sample count mismatch");
  }
  o.require(worst <= kTol, fmt("max deviation %.3g > 1e-12", worst));

  std::ostringstream off, dims;
  write_offset_csv(off, OffsetStats{-2.09, 1.25, 10, 1.0}, OffsetStats{0.1, 0.2, 10, 1.0});
  write_dimension_csv(dims, DimensionStats{5.0, 0.1, 2.0, 0.05});
  o.require(off.str() == "axis,delta,sigma,availability\nlongitudinal,-2.09,1.25,1\nlateral,0.1,0.2,1\n",
            "offset table schema");
  o.require(dims.str() == "E_l,sigma_l,E_w,sigma_w\n5,0.1,2,0.05\n", "dimension table schema");
  o.note(fmt("100 series, max deviation %.2g; table schemas verified", worst));
  return o;
}

Outcome bev_features() {
  Outcome o;
  const PipelineConfig cfg = PipelineConfig::defaults();
  const BevConfig& geo = cfg.bev.geometry;

  std::size_t violations = 0, occupied = 0;
  for (int i = 0; i < 100; ++i) {
    const LabeledFrame f = generate_frame(random_scene(6000 + static_cast<std::uint64_t>(i)));
    const ChannelImage img = extract_channels(f.frame.points, geo);
    const auto max_h = img.plane(Channel::kMaxHeight), mean_h = img.plane(Channel::kMeanHeight);
    const auto max_i = img.plane(Channel::kMaxIntensity), mean_i = img.plane(Channel::kMeanIntensity);
    const auto dens = img.plane(Channel::kDensity), occ = img.plane(Channel::kOccupancy);
    for (std::size_t k = 0; k < img.plane_size(); ++k) {
      occupied += occ[k] == 1.0f;
      violations += mean_h[k] > max_h[k] || mean_i[k] > max_i[k];
      violations += occ[k] != (dens[k] > 0.0f ? 1.0f : 0.0f);
    }
  }
  o.require(violations == 0, std::to_string(violations) + " channel invariant violations");

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> density(0.1, 0.7);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    BevConfig small = geo;
    small.image_size = i % 2 ? 20 : 50;
    const OccupancyGrid g = oracle::random_grid(rng, small.image_size, small.image_size, density(rng));
    OutputAttributeGrid attr = OutputAttributeGrid::zeros(small);
    for (std::size_t k = 0; k < g.size(); ++k) attr.objectness[k] = g[k] ? 1.0f : 0.0f;
    for (Connectivity conn : {Connectivity::kFour, Connectivity::kEight}) {
      const auto clusters = cluster_output_grid(attr, 0.5, conn);
      const LabelGrid ref = label_components(g, conn);
      std::vector<std::uint32_t> lab(g.size(), 0);
      for (std::size_t c = 0; c < clusters.size(); ++c)
        for (std::size_t cell : clusters[c].cells) lab[cell] = static_cast<std::uint32_t>(c + 1);
      mismatches += clusters.size() != ref.num_components || !oracle::same_partition(lab, ref.labels, g.size());
    }
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " zero-offset clusterings differ from labeling");

  const double cell = geo.cell_size();
  double worst = 0.0;
  for (double yaw : {0.0, std::numbers::pi / 2}) {
    BoxSpec van;
    van.center_x = 10.0;
    van.length = 5.0;
    van.width = 2.0;
    van.height = 2.0;
    van.yaw = yaw;
    const auto attr = footprint_attribute_grid({van}, geo);
    const auto clusters = cluster_output_grid(attr, cfg.bev.objectness_threshold);
    const auto obs = postprocess_clusters(clusters, cfg.bev.min_confidence, geo);
    o.require(obs.size() == 1, "van footprint did not yield exactly one obstacle");
    if (obs.size() != 1) continue;
    worst = std::max({worst, std::abs(obs[0].length - 5.0), std::abs(obs[0].width - 2.0)});
  }
  o.require(worst <= cell, fmt("van dimension error %.4f exceeds one cell (%.4f)", worst, cell));
  o.note(fmt("%.0f occupied cells checked; van dimension error %.4f m (cell %.4f m)", static_cast<double>(occupied),
             worst, cell));
  return o;
}

Outcome throughput() {
  Outcome o;
  const PipelineConfig cfg = PipelineConfig::defaults();
  const BenchReport rep = bench(cfg, cfg.bench.frames);
  std::ostringstream csv;
  write_bench_csv(csv, rep);
  std::printf("%s", csv.str().c_str());
  o.require(rep.stages.size() == 9 && rep.total().stage == "total", "bench report is missing stages");
  o.require(rep.total().mean_ms <= 50.0, fmt("mean latency %.2f ms > 50", rep.total().mean_ms));
  o.note(fmt("%.0f frames, %.0f points/frame, mean %.2f ms, p95 %.2f ms", static_cast<double>(rep.frames),
             rep.mean_points, rep.total().mean_ms, rep.total().p95_ms) +
         fmt(", %.0f Hz", rep.achieved_hz));
  return o;
}

Outcome morphology() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> side(5, 60);
  std::uniform_int_distribution<int> radius(1, 2);
  std::uniform_real_distribution<double> density(0.05, 0.9);
  auto subset = [](const OccupancyGrid& a, const OccupancyGrid& b) {
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k] && !b[k]) return false;
    return true;
  };
  int failures = 0, isolated_failures = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t w = side(rng), h = side(rng);
    const int r = radius(rng);
    OccupancyGrid g = oracle::random_grid(rng, w, h, density(rng));
    const auto op = morph_open(g, r), cl = morph_close(g, r), oc = morph_open_close(g, r);
    failures += !subset(op, g) || !subset(g, cl);
    failures += morph_open(op, r) != op || morph_close(cl, r) != cl;
    failures += morph_open_close(oc, r) != oc;
    failures += op != oracle::open(g, r) || cl != oracle::close(g, r);

    // An occupied cell with nothing else within 2r must vanish.
    const long cr = static_cast<long>(h / 2), cc = static_cast<long>(w / 2);
    for (long dr = -2 * r; dr <= 2 * r; ++dr)
      for (long dc = -2 * r; dc <= 2 * r; ++dc) {
        const long rr = cr + dr, c2 = cc + dc;
        if (rr >= 0 && c2 >= 0 && rr < static_cast<long>(h) && c2 < static_cast<long>(w)) g(rr, c2) = 0;
      }
    g(cr, cc) = 1;
    isolated_failures += morph_open_close(g, r)(cr, cc) != 0;
  }
  o.require(failures == 0, std::to_string(failures) + " property violations");
  o.require(isolated_failures == 0, std::to_string(isolated_failures) + " isolated cells survived");
  o.note("200 grids, radius 1-2");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*run)();
  };
  const Criterion criteria[] = {
      {"ground removal", ground_removal},     {"labeling oracle", labeling_oracle},
      {"end-to-end van", end_to_end_van},     {"ego-frame transform", transform_properties},
      {"metrics", metrics},                   {"bev features", bev_features},
      {"throughput", throughput},             {"morphology", morphology},
  };
  int failed = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s %d %s (%.1f s): %s\n", o.pass ? "PASS" : "FAIL", index, c.name, ms_since(t0) / 1000.0,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failed, index);
  return failed == 0 ? 0 : 1;
}
