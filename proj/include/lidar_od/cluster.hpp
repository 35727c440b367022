#pragma once

// Connected-component labeling of occupancy grids (two-pass raster scan with
// an array-based union-find) and per-component obstacle extraction.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "lidar_od/core.hpp"
#include "lidar_od/grid.hpp"

namespace lod {

// Disjoint sets over dense integer ids, union by rank with iterative path
// compression.
class UnionFind {
 public:
  UnionFind() = default;
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::uint32_t{0});
  }

  std::uint32_t add() {
    const auto id = static_cast<std::uint32_t>(parent_.size());
    parent_.push_back(id);
    rank_.push_back(0);
    return id;
  }

  std::size_t size() const { return parent_.size(); }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  // Returns the surviving root.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  bool connected(std::uint32_t a, std::uint32_t b) { return find(a) == find(b); }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

enum class Connectivity { kFour = 4, kEight = 8 };

struct LabelGrid {
  Grid2D<std::uint32_t> labels;  // 0 = free, 1..num_components
  std::uint32_t num_components = 0;

  std::size_t width() const { return labels.width(); }
  std::size_t height() const { return labels.height(); }
};

// Two-pass labeling. First pass assigns provisional labels from the already
// visited neighbours (left, and the row above) and records equivalences;
// second pass replaces each provisional label by a dense final id in order of
// first appearance.
inline LabelGrid label_components(const OccupancyGrid& grid,
                                  Connectivity connectivity = Connectivity::kEight) {
  const std::size_t w = grid.width();
  const std::size_t h = grid.height();
  const bool eight = connectivity == Connectivity::kEight;

  LabelGrid out;
  out.labels = Grid2D<std::uint32_t>(w, h, 0);
  auto& lab = out.labels;

  UnionFind uf;
  uf.add();  // id 0 is background

  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (grid(r, c) == 0) continue;
      const std::uint32_t up = r > 0 ? lab(r - 1, c) : 0;
      const std::uint32_t left = c > 0 ? lab(r, c - 1) : 0;
      const std::uint32_t up_left = (eight && r > 0 && c > 0) ? lab(r - 1, c - 1) : 0;
      const std::uint32_t up_right = (eight && r > 0 && c + 1 < w) ? lab(r - 1, c + 1) : 0;

      std::uint32_t label = 0;
      if (up) {
        // Under 8-connectivity the other visited neighbours are already
        // equivalent to the cell above.
        label = up;
        if (!eight && left) uf.unite(up, left);
      } else if (up_right) {
        label = up_right;
        if (up_left) uf.unite(up_right, up_left);
        if (left) uf.unite(up_right, left);
      } else if (up_left) {
        label = up_left;
        if (left) uf.unite(up_left, left);
      } else if (left) {
        label = left;
      } else {
        label = uf.add();
      }
      lab(r, c) = label;
    }
  }

  std::vector<std::uint32_t> dense(uf.size(), 0);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < lab.size(); ++i) {
    if (lab[i] == 0) continue;
    const std::uint32_t root = uf.find(lab[i]);
    if (dense[root] == 0) dense[root] = ++next;
    lab[i] = dense[root];
  }
  out.num_components = next;
  return out;
}

// One obstacle per component of at least `min_cells` cells. The center is the
// point-count-weighted mean of member cell centers (plain mean when the
// component holds no points, e.g. cells added by closing); length and width
// are the axis-aligned extents, length being the larger.
inline std::vector<ObstacleEstimate> extract_obstacles(const LabelGrid& labels,
                                                       const CellHistogram& hist,
                                                       const GridConfig& cfg,
                                                       std::size_t min_cells = 2) {
  if (labels.width() != hist.width() || labels.height() != hist.height() ||
      labels.width() != cfg.cols() || labels.height() != cfg.rows()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "label grid " + std::to_string(labels.width()) + "x" +
                    std::to_string(labels.height()) + " does not match histogram " +
                    std::to_string(hist.width()) + "x" + std::to_string(hist.height()));
  }

  struct Accum {
    std::size_t cells = 0;
    double weight = 0.0, wx = 0.0, wy = 0.0;
    double sx = 0.0, sy = 0.0;
    std::size_t col_min = std::numeric_limits<std::size_t>::max(), col_max = 0;
    std::size_t row_min = std::numeric_limits<std::size_t>::max(), row_max = 0;
  };
  std::vector<Accum> acc(labels.num_components + 1);

  for (std::size_t r = 0; r < labels.height(); ++r) {
    for (std::size_t c = 0; c < labels.width(); ++c) {
      const std::uint32_t id = labels.labels(r, c);
      if (id == 0) continue;
      Accum& a = acc[id];
      const double cx = cfg.center_x(c), cy = cfg.center_y(r);
      const double wgt = hist.counts(r, c);
      ++a.cells;
      a.sx += cx;
      a.sy += cy;
      a.weight += wgt;
      a.wx += wgt * cx;
      a.wy += wgt * cy;
      a.col_min = std::min(a.col_min, c);
      a.col_max = std::max(a.col_max, c);
      a.row_min = std::min(a.row_min, r);
      a.row_max = std::max(a.row_max, r);
    }
  }

  std::vector<ObstacleEstimate> out;
  for (std::size_t id = 1; id < acc.size(); ++id) {
    const Accum& a = acc[id];
    if (a.cells < std::max<std::size_t>(min_cells, 1)) continue;
    const double cx = a.weight > 0.0 ? a.wx / a.weight : a.sx / static_cast<double>(a.cells);
    const double cy = a.weight > 0.0 ? a.wy / a.weight : a.sy / static_cast<double>(a.cells);
    const double ex = static_cast<double>(a.col_max - a.col_min + 1) * cfg.cell_size;
    const double ey = static_cast<double>(a.row_max - a.row_min + 1) * cfg.cell_size;
    out.push_back(make_obstacle(cx, cy, std::max(ex, ey), std::min(ex, ey)));
  }
  return out;
}

}  // namespace lod
