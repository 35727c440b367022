#pragma once

// Horizontal-plane discretization: per-cell point histograms, radially
// decaying occupancy thresholds and binary morphology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lidar_od/core.hpp"

namespace lod {

struct GridConfig {
  double cell_size = 0.3;
  double x_min = -30.0;
  double x_max = 30.0;
  double y_min = -30.0;
  double y_max = 30.0;
  double z_min = 0.1;
  double z_max = 3.0;

  std::size_t cols() const { return cell_count(x_max - x_min); }
  std::size_t rows() const { return cell_count(y_max - y_min); }

  void validate() const {
    if (!(cell_size > 0.0) || !(x_max > x_min) || !(y_max > y_min) || !(z_max >= z_min)) {
      throw Error(ErrorCode::kInvalidConfig, "grid needs cell_size > 0 and non-empty extents");
    }
  }

  // Cell centers in the vehicle frame.
  double center_x(std::size_t col) const { return x_min + (static_cast<double>(col) + 0.5) * cell_size; }
  double center_y(std::size_t row) const { return y_min + (static_cast<double>(row) + 0.5) * cell_size; }

 private:
  std::size_t cell_count(double extent) const {
    // Tolerate representation error, e.g. 60 / 0.3 = 200.00000000000003.
    return static_cast<std::size_t>(std::ceil(extent / cell_size - 1e-9));
  }
};

// Row-major 2D array; row indexes y, column indexes x.
template <typename T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t row, std::size_t col) { return data_[row * width_ + col]; }
  const T& operator()(std::size_t row, std::size_t col) const { return data_[row * width_ + col]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool same_shape(std::size_t w, std::size_t h) const { return width_ == w && height_ == h; }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

struct CellHistogram {
  Grid2D<std::uint32_t> counts;
  Grid2D<double> cell_range;  // horizontal distance of each cell center
  std::size_t projected = 0;
  std::size_t dropped = 0;

  std::size_t width() const { return counts.width(); }
  std::size_t height() const { return counts.height(); }
};

struct ThresholdBreakpoint {
  double range_start = 0.0;
  std::uint32_t count_threshold = 1;
};

struct ThresholdProfile {
  std::vector<ThresholdBreakpoint> breakpoints{{0.0, 5}, {10.0, 3}, {20.0, 2}};
  std::uint32_t noise_min_count = 2;

  void validate() const {
    if (breakpoints.empty()) throw Error(ErrorCode::kInvalidConfig, "threshold profile is empty");
    for (std::size_t i = 0; i < breakpoints.size(); ++i) {
      if (breakpoints[i].count_threshold < 1) {
        throw Error(ErrorCode::kInvalidConfig, "count thresholds must be >= 1");
      }
      if (i > 0 && (breakpoints[i].range_start <= breakpoints[i - 1].range_start ||
                    breakpoints[i].count_threshold > breakpoints[i - 1].count_threshold)) {
        throw Error(ErrorCode::kInvalidConfig,
                    "breakpoints must have increasing range and non-increasing thresholds");
      }
    }
    if (noise_min_count < 1) throw Error(ErrorCode::kInvalidConfig, "noise_min_count must be >= 1");
  }
};

using OccupancyGrid = Grid2D<std::uint8_t>;

// Half-open cells [lo, lo + cell_size); z is inclusive on both ends.
inline CellHistogram project_to_grid(std::span<const Point3> points, const GridConfig& cfg) {
  cfg.validate();
  const std::size_t cols = cfg.cols();
  const std::size_t rows = cfg.rows();

  CellHistogram hist;
  hist.counts = Grid2D<std::uint32_t>(cols, rows, 0);
  hist.cell_range = Grid2D<double>(cols, rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      hist.cell_range(r, c) = std::hypot(cfg.center_x(c), cfg.center_y(r));
    }
  }

  const double inv = 1.0 / cfg.cell_size;
  for (const Point3& p : points) {
    if (!(p.x >= cfg.x_min && p.x < cfg.x_max && p.y >= cfg.y_min && p.y < cfg.y_max &&
          p.z >= cfg.z_min && p.z <= cfg.z_max)) {
      ++hist.dropped;
      continue;
    }
    const auto col = std::min(static_cast<std::size_t>((p.x - cfg.x_min) * inv), cols - 1);
    const auto row = std::min(static_cast<std::size_t>((p.y - cfg.y_min) * inv), rows - 1);
    ++hist.counts(row, col);
    ++hist.projected;
  }
  return hist;
}

// Threshold of the last breakpoint starting at or before r; ranges before
// the first breakpoint use the first threshold.
inline std::uint32_t threshold_for_range(double r, const ThresholdProfile& profile) {
  std::uint32_t t = profile.breakpoints.front().count_threshold;
  for (const ThresholdBreakpoint& bp : profile.breakpoints) {
    if (bp.range_start <= r) {
      t = bp.count_threshold;
    } else {
      break;
    }
  }
  return t;
}

inline OccupancyGrid occupancy_from_counts(const CellHistogram& hist, const ThresholdProfile& profile) {
  profile.validate();
  OccupancyGrid grid(hist.width(), hist.height(), 0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const std::uint32_t needed =
        std::max(threshold_for_range(hist.cell_range[i], profile), profile.noise_min_count);
    grid[i] = hist.counts[i] >= needed ? 1 : 0;
  }
  return grid;
}

namespace detail {

// Separable square min/max filter over a (2r+1) window; cells outside the
// grid read as free.
inline OccupancyGrid box_filter(const OccupancyGrid& in, int radius, bool erode) {
  const auto w = static_cast<std::ptrdiff_t>(in.width());
  const auto h = static_cast<std::ptrdiff_t>(in.height());
  OccupancyGrid tmp(in.width(), in.height(), 0);
  OccupancyGrid out(in.width(), in.height(), 0);

  auto pass = [&](const OccupancyGrid& src, OccupancyGrid& dst, bool horizontal) {
    const std::ptrdiff_t lines = horizontal ? h : w;
    const std::ptrdiff_t len = horizontal ? w : h;
    for (std::ptrdiff_t l = 0; l < lines; ++l) {
      auto at = [&](std::ptrdiff_t i) -> std::uint8_t {
        if (i < 0 || i >= len) return 0;
        return (horizontal ? src(l, i) : src(i, l)) != 0 ? 1 : 0;
      };
      // Running count of occupied cells in the window.
      std::ptrdiff_t occupied = 0;
      for (std::ptrdiff_t i = -radius; i <= radius; ++i) occupied += at(i);
      for (std::ptrdiff_t i = 0; i < len; ++i) {
        const std::uint8_t v = erode ? (occupied == 2 * radius + 1) : (occupied > 0);
        if (horizontal) {
          dst(l, i) = v;
        } else {
          dst(i, l) = v;
        }
        occupied += at(i + radius + 1) - at(i - radius);
      }
    }
  };
  pass(in, tmp, true);
  pass(tmp, out, false);
  return out;
}

}  // namespace detail

inline OccupancyGrid erode(const OccupancyGrid& grid, int radius) {
  return detail::box_filter(grid, radius, true);
}

inline OccupancyGrid dilate(const OccupancyGrid& grid, int radius) {
  return detail::box_filter(grid, radius, false);
}

inline OccupancyGrid morph_open(const OccupancyGrid& grid, int radius) {
  return dilate(erode(grid, radius), radius);
}

// The dilation may spill past the border; pad so the following erosion sees
// those cells, otherwise closing would shrink occupied border cells.
inline OccupancyGrid morph_close(const OccupancyGrid& grid, int radius) {
  const auto pad = static_cast<std::size_t>(radius);
  OccupancyGrid padded(grid.width() + 2 * pad, grid.height() + 2 * pad, 0);
  for (std::size_t r = 0; r < grid.height(); ++r) {
    for (std::size_t c = 0; c < grid.width(); ++c) padded(r + pad, c + pad) = grid(r, c);
  }
  const OccupancyGrid closed = erode(dilate(padded, radius), radius);
  OccupancyGrid out(grid.width(), grid.height(), 0);
  for (std::size_t r = 0; r < grid.height(); ++r) {
    for (std::size_t c = 0; c < grid.width(); ++c) out(r, c) = closed(r + pad, c + pad);
  }
  return out;
}

// Opening (drops specks) followed by closing (bridges small gaps).
inline OccupancyGrid morph_open_close(const OccupancyGrid& grid, int kernel_radius) {
  if (kernel_radius < 1) {
    throw Error(ErrorCode::kInvalidConfig, "kernel_radius must be >= 1");
  }
  return morph_close(morph_open(grid, kernel_radius), kernel_radius);
}

}  // namespace lod
