#pragma once

// Bird's-eye-view feature extraction (six stacked channels over a square
// grid) and post-processing of a detector's per-cell attribute grid into
// obstacles. The network between the two is abstracted as `Detector`.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lidar_od/cluster.hpp"
#include "lidar_od/core.hpp"
#include "lidar_od/grid.hpp"

namespace lod {

enum class DensityMode { kLogNormalized, kRawCount };

struct BevConfig {
  std::size_t image_size = 672;
  double range = 30.0;  // half-extent, meters
  DensityMode density_mode = DensityMode::kLogNormalized;
  double density_log_norm = 64.0;

  double cell_size() const { return 2.0 * range / static_cast<double>(image_size); }

  void validate() const {
    if (image_size < 1 || !(range > 0.0)) {
      throw Error(ErrorCode::kInvalidConfig, "bev needs image_size >= 1 and range > 0");
    }
    if (density_mode == DensityMode::kLogNormalized && !(density_log_norm > 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "density_log_norm must exceed 1");
    }
  }

  // Cell index along one axis, or -1 outside [-range, range).
  std::ptrdiff_t index_of(double v) const {
    if (!(v >= -range && v < range)) return -1;
    const auto i = static_cast<std::ptrdiff_t>((v + range) / cell_size());
    return std::min(i, static_cast<std::ptrdiff_t>(image_size) - 1);
  }

  double center_of(std::size_t i) const {
    return -range + (static_cast<double>(i) + 0.5) * cell_size();
  }
};

enum class Channel : std::size_t {
  kMaxHeight = 0,
  kMeanHeight,
  kMaxIntensity,
  kMeanIntensity,
  kDensity,
  kOccupancy,
};
inline constexpr std::size_t kNumChannels = 6;

// Plane-major, row-major float tensor; row indexes y, column indexes x.
struct ChannelImage {
  BevConfig geometry;
  std::vector<float> data;

  std::size_t side() const { return geometry.image_size; }
  std::size_t plane_size() const { return side() * side(); }

  std::span<float> plane(Channel ch) {
    return std::span<float>(data).subspan(static_cast<std::size_t>(ch) * plane_size(), plane_size());
  }
  std::span<const float> plane(Channel ch) const {
    return std::span<const float>(data).subspan(static_cast<std::size_t>(ch) * plane_size(),
                                                plane_size());
  }
  float at(Channel ch, std::size_t row, std::size_t col) const {
    return plane(ch)[row * side() + col];
  }
};

inline ChannelImage extract_channels(std::span<const Point3> points, const BevConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.image_size * cfg.image_size;

  std::vector<std::uint32_t> count(n, 0);
  std::vector<double> sum_z(n, 0.0), sum_i(n, 0.0);
  std::vector<double> max_z(n, -std::numeric_limits<double>::infinity());
  std::vector<double> max_i(n, -std::numeric_limits<double>::infinity());

  for (const Point3& p : points) {
    const std::ptrdiff_t col = cfg.index_of(p.x);
    const std::ptrdiff_t row = cfg.index_of(p.y);
    if (col < 0 || row < 0) continue;
    const auto k = static_cast<std::size_t>(row) * cfg.image_size + static_cast<std::size_t>(col);
    ++count[k];
    sum_z[k] += p.z;
    sum_i[k] += p.intensity;
    max_z[k] = std::max(max_z[k], p.z);
    max_i[k] = std::max(max_i[k], p.intensity);
  }

  ChannelImage img;
  img.geometry = cfg;
  img.data.assign(kNumChannels * n, 0.0f);
  auto max_h = img.plane(Channel::kMaxHeight);
  auto mean_h = img.plane(Channel::kMeanHeight);
  auto max_in = img.plane(Channel::kMaxIntensity);
  auto mean_in = img.plane(Channel::kMeanIntensity);
  auto density = img.plane(Channel::kDensity);
  auto occ = img.plane(Channel::kOccupancy);
  const double log_norm = std::log(cfg.density_log_norm);

  for (std::size_t k = 0; k < n; ++k) {
    if (count[k] == 0) continue;
    const double c = count[k];
    max_h[k] = static_cast<float>(max_z[k]);
    // Float rounding must not push the mean above the max.
    mean_h[k] = std::min(static_cast<float>(sum_z[k] / c), max_h[k]);
    max_in[k] = static_cast<float>(max_i[k]);
    mean_in[k] = std::min(static_cast<float>(sum_i[k] / c), max_in[k]);
    density[k] = cfg.density_mode == DensityMode::kRawCount
                     ? static_cast<float>(c)
                     : static_cast<float>(std::clamp(std::log(c + 1.0) / log_norm, 0.0, 1.0));
    occ[k] = 1.0f;
  }
  return img;
}

// Per-cell detector output. Offsets point from the cell center to the
// predicted object center (meters). `heading` and `class_scores` are carried
// through aggregation but never used geometrically.
struct OutputAttributeGrid {
  BevConfig geometry;
  Grid2D<float> objectness;
  Grid2D<float> offset_x;
  Grid2D<float> offset_y;
  Grid2D<float> confidence;
  Grid2D<float> height;
  Grid2D<float> heading;
  std::vector<Grid2D<float>> class_scores;

  static OutputAttributeGrid zeros(const BevConfig& cfg, std::size_t num_classes = 0) {
    const std::size_t s = cfg.image_size;
    OutputAttributeGrid g;
    g.geometry = cfg;
    g.objectness = g.offset_x = g.offset_y = g.confidence = g.height = g.heading =
        Grid2D<float>(s, s, 0.0f);
    g.class_scores.assign(num_classes, Grid2D<float>(s, s, 0.0f));
    return g;
  }

  bool consistent() const {
    const std::size_t s = geometry.image_size;
    auto ok = [s](const Grid2D<float>& g) { return g.same_shape(s, s); };
    return ok(objectness) && ok(offset_x) && ok(offset_y) && ok(confidence) && ok(height) &&
           ok(heading) && std::all_of(class_scores.begin(), class_scores.end(), ok);
  }
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual OutputAttributeGrid detect(const ChannelImage& image) = 0;
};

// Stand-in detector: an occupied cell whose peak height clears `min_height`
// is an object cell with confidence 1, zero offset and the peak as height.
class HeightThresholdDetector : public Detector {
 public:
  explicit HeightThresholdDetector(double min_height = 0.3) : min_height_(min_height) {}

  OutputAttributeGrid detect(const ChannelImage& image) override {
    OutputAttributeGrid out = OutputAttributeGrid::zeros(image.geometry);
    const auto occ = image.plane(Channel::kOccupancy);
    const auto max_h = image.plane(Channel::kMaxHeight);
    for (std::size_t k = 0; k < occ.size(); ++k) {
      if (occ[k] > 0.5f && max_h[k] >= min_height_) {
        out.objectness[k] = 1.0f;
        out.confidence[k] = 1.0f;
        out.height[k] = max_h[k];
      }
    }
    return out;
  }

 private:
  double min_height_;
};

struct RawCluster {
  std::vector<std::size_t> cells;  // row * side + col, raster order
  std::size_t row_min = 0, row_max = 0, col_min = 0, col_max = 0;
  double mean_confidence = 0.0;
  double mean_height = 0.0;
  double mean_offset_x = 0.0;
  double mean_offset_y = 0.0;
  double mean_heading = 0.0;
  std::vector<double> mean_class_scores;
};

// Groups object cells (objectness >= threshold). Cells join their already
// visited neighbours and the object cell their center offset points into.
// With all offsets zero this is plain connected-component labeling; clusters
// are returned in order of their first cell in raster order.
inline std::vector<RawCluster> cluster_output_grid(const OutputAttributeGrid& attr,
                                                   double objectness_threshold,
                                                   Connectivity connectivity = Connectivity::kEight) {
  if (!attr.consistent()) {
    throw Error(ErrorCode::kGeometryMismatch,
                "attribute planes do not match image_size " + std::to_string(attr.geometry.image_size));
  }
  if (!(objectness_threshold >= 0.0 && objectness_threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "objectness threshold must lie in [0, 1]");
  }
  const BevConfig& geo = attr.geometry;
  const std::size_t side = geo.image_size;
  const std::size_t n = side * side;
  constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();

  std::vector<std::uint32_t> node(n, kNone);
  std::vector<std::size_t> members;
  for (std::size_t k = 0; k < n; ++k) {
    if (attr.objectness[k] >= objectness_threshold) {
      node[k] = static_cast<std::uint32_t>(members.size());
      members.push_back(k);
    }
  }

  UnionFind uf(members.size());
  const bool eight = connectivity == Connectivity::kEight;
  for (std::size_t m = 0; m < members.size(); ++m) {
    const std::size_t k = members[m];
    const std::size_t r = k / side, c = k % side;
    auto link = [&](std::size_t rr, std::size_t cc) {
      const std::uint32_t other = node[rr * side + cc];
      if (other != kNone) uf.unite(static_cast<std::uint32_t>(m), other);
    };
    if (c > 0) link(r, c - 1);
    if (r > 0) {
      link(r - 1, c);
      if (eight && c > 0) link(r - 1, c - 1);
      if (eight && c + 1 < side) link(r - 1, c + 1);
    }
    const std::ptrdiff_t tc = geo.index_of(geo.center_of(c) + attr.offset_x[k]);
    const std::ptrdiff_t tr = geo.index_of(geo.center_of(r) + attr.offset_y[k]);
    if (tc >= 0 && tr >= 0) link(static_cast<std::size_t>(tr), static_cast<std::size_t>(tc));
  }

  std::vector<std::uint32_t> cluster_of(members.size(), kNone);
  std::vector<RawCluster> clusters;
  const std::size_t num_classes = attr.class_scores.size();
  for (std::size_t m = 0; m < members.size(); ++m) {
    const std::uint32_t root = uf.find(static_cast<std::uint32_t>(m));
    if (cluster_of[root] == kNone) {
      cluster_of[root] = static_cast<std::uint32_t>(clusters.size());
      RawCluster fresh;
      fresh.row_min = fresh.col_min = std::numeric_limits<std::size_t>::max();
      fresh.mean_class_scores.assign(num_classes, 0.0);
      clusters.push_back(std::move(fresh));
    }
    RawCluster& cl = clusters[cluster_of[root]];
    const std::size_t k = members[m];
    const std::size_t r = k / side, c = k % side;
    cl.cells.push_back(k);
    cl.row_min = std::min(cl.row_min, r);
    cl.row_max = std::max(cl.row_max, r);
    cl.col_min = std::min(cl.col_min, c);
    cl.col_max = std::max(cl.col_max, c);
    cl.mean_confidence += attr.confidence[k];
    cl.mean_height += attr.height[k];
    cl.mean_offset_x += attr.offset_x[k];
    cl.mean_offset_y += attr.offset_y[k];
    cl.mean_heading += attr.heading[k];
    for (std::size_t j = 0; j < num_classes; ++j) cl.mean_class_scores[j] += attr.class_scores[j][k];
  }
  for (RawCluster& cl : clusters) {
    const double inv = 1.0 / static_cast<double>(cl.cells.size());
    cl.mean_confidence *= inv;
    cl.mean_height *= inv;
    cl.mean_offset_x *= inv;
    cl.mean_offset_y *= inv;
    cl.mean_heading *= inv;
    for (double& s : cl.mean_class_scores) s *= inv;
  }
  return clusters;
}

// Drops clusters below `min_confidence`; the survivors are centered on the
// mean member cell center shifted by the mean offset and sized by the member
// cells' axis-aligned extent.
inline std::vector<ObstacleEstimate> postprocess_clusters(std::span<const RawCluster> clusters,
                                                          double min_confidence, const BevConfig& cfg,
                                                          std::span<const std::string> class_names = {}) {
  const std::size_t side = cfg.image_size;
  const double cell = cfg.cell_size();
  std::vector<ObstacleEstimate> out;
  for (const RawCluster& cl : clusters) {
    if (cl.cells.empty() || cl.mean_confidence < min_confidence) continue;
    double sx = 0.0, sy = 0.0;
    for (std::size_t k : cl.cells) {
      sx += cfg.center_of(k % side);
      sy += cfg.center_of(k / side);
    }
    const double inv = 1.0 / static_cast<double>(cl.cells.size());
    const double ex = static_cast<double>(cl.col_max - cl.col_min + 1) * cell;
    const double ey = static_cast<double>(cl.row_max - cl.row_min + 1) * cell;

    std::string tag = "unknown";
    if (!cl.mean_class_scores.empty()) {
      const auto best = static_cast<std::size_t>(
          std::max_element(cl.mean_class_scores.begin(), cl.mean_class_scores.end()) -
          cl.mean_class_scores.begin());
      tag = best < class_names.size() ? class_names[best] : "class_" + std::to_string(best);
    }
    out.push_back(make_obstacle(sx * inv + cl.mean_offset_x, sy * inv + cl.mean_offset_y,
                                std::max(ex, ey), std::min(ex, ey), cl.mean_height,
                                cl.mean_confidence, std::move(tag)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary tensor files: one text line "BEV v1 <planes> <H> <W>\n" followed by
// planes*H*W little-endian float32 values, plane-major then row-major.

struct BevTensor {
  std::size_t planes = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;
};

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace detail

inline void write_bev_tensor(std::ostream& os, const BevTensor& t) {
  if (t.data.size() != t.planes * t.rows * t.cols) {
    throw Error(ErrorCode::kGeometryMismatch, "tensor data size does not match its shape");
  }
  os << "BEV v1 " << t.planes << ' ' << t.rows << ' ' << t.cols << '\n';
  std::vector<char> buf(t.data.size() * 4);
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(t.data[i]);
    bits = detail::to_little_endian(bits);
    std::memcpy(buf.data() + 4 * i, &bits, 4);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw Error(ErrorCode::kIoError, "failed writing BEV tensor");
}

inline BevTensor read_bev_tensor(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw Error(ErrorCode::kParseError, "missing BEV header");
  std::istringstream hs(header);
  std::string magic, version;
  BevTensor t;
  if (!(hs >> magic >> version >> t.planes >> t.rows >> t.cols) || magic != "BEV" || version != "v1") {
    throw Error(ErrorCode::kParseError, "bad BEV header '" + header + "'");
  }
  const std::size_t n = t.planes * t.rows * t.cols;
  std::vector<char> buf(n * 4);
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) {
    throw Error(ErrorCode::kParseError, "BEV payload truncated: expected " +
                                            std::to_string(buf.size()) + " bytes");
  }
  t.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, buf.data() + 4 * i, 4);
    t.data[i] = std::bit_cast<float>(detail::to_little_endian(bits));
  }
  return t;
}

inline BevTensor to_tensor(const ChannelImage& img) {
  return BevTensor{kNumChannels, img.side(), img.side(), img.data};
}

}  // namespace lod
