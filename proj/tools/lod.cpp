// lod: command-line front end for the obstacle detection pipelines.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lidar_od/bev_features.hpp"
#include "lidar_od/config.hpp"
#include "lidar_od/eval.hpp"
#include "lidar_od/io.hpp"
#include "lidar_od/pipeline.hpp"
#include "lidar_od/synth.hpp"

namespace fs = std::filesystem;
using namespace lod;

namespace {

struct Options {
  std::string config_path;
  std::string pipeline;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  bool dump_default = false;

  std::string input_dir;
  std::optional<std::size_t> frames;
  std::string detector = "height";
  std::string estimates = "obstacles.csv";
  std::string truth = "gt.csv";
  std::string ego = "ego.csv";
  std::string bench_csv;
};

int exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

PipelineConfig resolve_config(const Options& opt) {
  PipelineConfig cfg = opt.config_path.empty() ? PipelineConfig::defaults() : load_config(opt.config_path);
  if (opt.pipeline == "geometric") cfg.pipeline = PipelineKind::kGeometric;
  if (opt.pipeline == "bev") cfg.pipeline = PipelineKind::kBev;
  if (opt.seed) cfg.synth.scene.rng_seed = *opt.seed;
  if (opt.frames) cfg.synth.frames = *opt.frames;
  return cfg;
}

fs::path out_path(const Options& opt, const std::string& name) {
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create output directory " + opt.out_dir + ": " + ec.message());
  return fs::path(opt.out_dir) / name;
}

std::string frame_file(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06lld.pcd", static_cast<long long>(id));
  return buf;
}

struct InputFrame {
  PointCloudFrame frame;
  std::optional<SceneSpec> scene;  // set for synthesized frames
};

// Frames from a PCD directory (sorted by file name) or, without one, the
// configured synthetic sequence.
std::vector<InputFrame> load_frames(const Options& opt, const PipelineConfig& cfg) {
  std::vector<InputFrame> out;
  if (!opt.input_dir.empty()) {
    if (!fs::is_directory(opt.input_dir)) throw Error(ErrorCode::kIoError, "not a directory: " + opt.input_dir);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(opt.input_dir)) {
      if (e.is_regular_file() && e.path().extension() == ".pcd") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back({read_frame_pcd(f.string()), std::nullopt});
    if (out.empty()) throw Error(ErrorCode::kIoError, "no .pcd files in " + opt.input_dir);
    return out;
  }
  for (std::size_t i = 0; i < cfg.synth.frames; ++i) {
    const auto id = static_cast<std::int64_t>(i);
    SceneSpec s = scene_at(cfg.synth.scene, static_cast<double>(i) * cfg.frame_period, id);
    out.push_back({generate_frame(s).frame, s});
  }
  return out;
}

int cmd_synth(const Options& opt) {
  const PipelineConfig cfg = resolve_config(opt);
  std::vector<FrameObstacles> truth;
  auto gt = open_out(out_path(opt, "gt.csv").string());
  auto ego = open_out(out_path(opt, "ego.csv").string());
  gt << "t,X,Y,psi\n";
  ego << "t,X,Y,psi\n";
  for (std::size_t i = 0; i < cfg.synth.frames; ++i) {
    const auto id = static_cast<std::int64_t>(i);
    const SceneSpec s = scene_at(cfg.synth.scene, static_cast<double>(i) * cfg.frame_period, id);
    const LabeledFrame f = generate_frame(s);
    auto pcd = open_out(out_path(opt, frame_file(id)).string());
    write_frame_pcd(pcd, f.frame);
    truth.push_back({id, s.timestamp, expected_obstacles(s)});
    // The ego vehicle rests at the origin facing +X, so absolute and
    // vehicle-frame coordinates coincide.
    if (!s.obstacles.empty()) {
      const BoxSpec& b = s.obstacles.front();
      gt << format_double(s.timestamp) << ',' << format_double(b.center_x) << ',' << format_double(b.center_y)
         << ',' << format_double(b.yaw) << '\n';
    }
    ego << format_double(s.timestamp) << ",0,0,0\n";
  }
  auto tc = open_out(out_path(opt, "truth_obstacles.csv").string());
  write_obstacles_csv(tc, truth);
  std::cout << "wrote " << cfg.synth.frames << " frames to " << opt.out_dir << '\n';
  return 0;
}

int cmd_detect(const Options& opt) {
  const PipelineConfig cfg = resolve_config(opt);
  std::vector<InputFrame> frames = load_frames(opt, cfg);
  std::sort(frames.begin(), frames.end(),
            [](const InputFrame& a, const InputFrame& b) { return a.frame.frame_id < b.frame.frame_id; });

  std::vector<FrameObstacles> results;
  for (const InputFrame& in : frames) {
    PipelineResult r;
    if (cfg.pipeline == PipelineKind::kGeometric) {
      r = run_geometric(in.frame, cfg);
    } else {
      std::unique_ptr<Detector> det;
      if (opt.detector == "footprint") {
        if (!in.scene) throw Error(ErrorCode::kInvalidConfig, "the footprint detector needs synthetic input");
        det = std::make_unique<FootprintDetector>(in.scene->obstacles);
      } else {
        det = std::make_unique<HeightThresholdDetector>(cfg.bev.detector_min_height);
      }
      r = run_bev(in.frame, cfg, *det);
    }
    results.push_back({in.frame.frame_id, in.frame.timestamp, std::move(r.obstacles)});
  }
  auto os = open_out(out_path(opt, "obstacles.csv").string());
  write_obstacles_csv(os, results);
  std::size_t n = 0;
  for (const auto& f : results) n += f.obstacles.size();
  std::cout << "detected " << n << " obstacles in " << results.size() << " frames\n";
  return 0;
}

int cmd_eval(const Options& opt) {
  const PipelineConfig cfg = resolve_config(opt);
  auto est_in = open_in(opt.estimates);
  auto gt_in = open_in(opt.truth);
  auto ego_in = open_in(opt.ego);

  std::vector<TimedEstimates> est;
  for (auto& f : read_obstacles_csv(est_in, opt.estimates)) est.push_back({f.t, std::move(f.obstacles)});
  std::stable_sort(est.begin(), est.end(), [](const auto& a, const auto& b) { return a.t < b.t; });
  const auto truth = read_truth_csv(gt_in, cfg.eval.reference, opt.truth);
  const auto ego = read_ego_csv(ego_in, opt.ego);
  if (truth.empty()) throw Error(ErrorCode::kEmptySeries, opt.truth + ": no ground-truth rows");
  if (ego.empty()) throw Error(ErrorCode::kEmptySeries, opt.ego + ": no ego rows");

  const EvalReport rep = evaluate_series(est, truth, ego, cfg.eval.params);
  if (!rep.longitudinal) throw Error(ErrorCode::kEmptySeries, "no estimate matched the ground truth");

  auto off = open_out(out_path(opt, "offsets.csv").string());
  write_offset_csv(off, *rep.longitudinal, *rep.lateral);
  auto dim = open_out(out_path(opt, "dimensions.csv").string());
  write_dimension_csv(dim, *rep.dimensions);
  auto cmp = open_out(out_path(opt, "comparison.csv").string());
  write_comparison_csv(cmp, rep.rows);

  std::cout << std::fixed << std::setprecision(3) << "longitudinal delta " << rep.longitudinal->mean_offset
            << " sigma " << rep.longitudinal->std_dev << "\nlateral      delta " << rep.lateral->mean_offset
            << " sigma " << rep.lateral->std_dev << "\navailability " << rep.longitudinal->availability << '\n';
  return 0;
}

int cmd_bench(const Options& opt) {
  const PipelineConfig cfg = resolve_config(opt);
  const std::size_t n = opt.frames.value_or(cfg.bench.frames);
  const BenchReport rep = bench(cfg, n);
  std::cout << "frames " << rep.frames << ", mean points per frame " << std::fixed << std::setprecision(0)
            << rep.mean_points << '\n';
  std::cout << std::left << std::setw(14) << "stage" << std::right << std::setw(10) << "mean_ms" << std::setw(10)
            << "p95_ms" << std::setw(10) << "max_ms" << '\n'
            << std::setprecision(3);
  for (const StageStats& s : rep.stages) {
    std::cout << std::left << std::setw(14) << s.stage << std::right << std::setw(10) << s.mean_ms << std::setw(10)
              << s.p95_ms << std::setw(10) << s.max_ms << '\n';
  }
  std::cout << std::setprecision(1) << "achieved " << rep.achieved_hz << " Hz\n";
  if (!opt.bench_csv.empty()) {
    auto os = open_out(opt.bench_csv);
    write_bench_csv(os, rep);
  }
  return 0;
}

int cmd_bev_export(const Options& opt) {
  const PipelineConfig cfg = resolve_config(opt);
  const auto frames = load_frames(opt, cfg);
  for (const InputFrame& in : frames) {
    const ValidatedFrame v = validate_frame(in.frame);
    const PlaneModel plane = fit_plane_ransac(v.frame.points, cfg.ground_filter);
    const GroundSplit split = split_ground(v.frame.points, plane, cfg.ground_filter.distance_threshold);
    const ChannelImage img = extract_channels(heights_above_plane(split.non_ground, plane), cfg.bev.geometry);
    char name[32];
    std::snprintf(name, sizeof name, "bev_%06lld.bin", static_cast<long long>(in.frame.frame_id));
    auto os = open_out(out_path(opt, name).string(), std::ios::out | std::ios::binary);
    write_bev_tensor(os, to_tensor(img));
  }
  std::cout << "exported " << frames.size() << " channel images to " << opt.out_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"LiDAR obstacle detection: geometric and bird's-eye-view pipelines, evaluation and benchmarks"};
  app.option_defaults()->always_capture_default();
  app.add_option("--config", opt.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--pipeline", opt.pipeline, "Override the configured pipeline")
      ->check(CLI::IsMember({"geometric", "bev"}));
  app.add_option("--seed", opt.seed, "Seed for synthetic scenes");
  app.add_option("--out-dir", opt.out_dir, "Directory for output files");
  app.add_flag("--dump-default-config", opt.dump_default, "Print the default configuration and exit");

  auto* synth = app.add_subcommand("synth", "Write synthetic PCD frames plus ground-truth CSVs");
  synth->add_option("--frames", opt.frames, "Number of frames");

  auto* detect = app.add_subcommand("detect", "Detect obstacles in PCD frames (or synthetic frames)");
  detect->add_option("--input", opt.input_dir, "Directory of .pcd frames; synthetic frames when omitted");
  detect->add_option("--frames", opt.frames, "Number of synthetic frames");
  detect->add_option("--detector", opt.detector, "Detector for the bev pipeline")
      ->check(CLI::IsMember({"height", "footprint"}));

  auto* eval = app.add_subcommand("eval", "Compare estimates with ground truth");
  eval->add_option("--estimates", opt.estimates, "Obstacle CSV");
  eval->add_option("--truth", opt.truth, "Ground-truth CSV (t,X,Y[,psi] or t,lat,lon[,psi])");
  eval->add_option("--ego", opt.ego, "Ego pose CSV (t,X,Y,psi)");

  auto* bench_cmd = app.add_subcommand("bench", "Time the geometric pipeline on synthetic frames");
  bench_cmd->add_option("--frames", opt.frames, "Number of frames");
  bench_cmd->add_option("--csv", opt.bench_csv, "Also write the report as CSV");

  auto* bev = app.add_subcommand("bev-export", "Write channel images as binary tensors");
  bev->add_option("--input", opt.input_dir, "Directory of .pcd frames; synthetic frames when omitted");
  bev->add_option("--frames", opt.frames, "Number of synthetic frames");

  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (opt.dump_default) {
      std::cout << to_json(PipelineConfig::defaults()).dump(2) << '\n';
      return 0;
    }
    if (synth->parsed()) return cmd_synth(opt);
    if (detect->parsed()) return cmd_detect(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (bench_cmd->parsed()) return cmd_bench(opt);
    if (bev->parsed()) return cmd_bev_export(opt);
    std::cerr << app.help();
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
}
