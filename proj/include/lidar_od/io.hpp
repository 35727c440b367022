#pragma once

// Text formats: ASCII PCD frames, the obstacle CSV and the evaluation CSVs.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "lidar_od/core.hpp"
#include "lidar_od/eval.hpp"

namespace lod {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s == "nan" || s == "NaN" || s == "-nan") return std::nan("");
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// PCD (ASCII subset): FIELDS x y z [intensity], COUNT 1, DATA ascii. An 8-bit
// unsigned intensity field is read as raw [0, 255]. A comment of the form
// "# timestamp <t> frame_id <id>" sets the frame metadata.

inline PointCloudFrame read_frame_pcd(std::istream& in, const std::string& name = "<stream>") {
  PointCloudFrame frame;
  std::vector<std::string> fields, sizes, types;
  std::optional<std::size_t> points, width, height;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](ErrorCode code, const std::string& msg) {
    throw Error(code, name + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto parse_count = [&](std::string_view tok) {
    std::size_t v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) fail(ErrorCode::kParseError, "bad count '" + std::string(tok) + "'");
    return v;
  };

  bool have_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    if (sv.front() == '#') {
      const auto toks = split_ws(sv.substr(1));
      for (std::size_t i = 0; i + 1 < toks.size(); i += 2) {
        if (toks[i] == "timestamp") {
          if (auto t = parse_double(toks[i + 1])) frame.timestamp = *t;
        } else if (toks[i] == "frame_id") {
          if (auto id = parse_double(toks[i + 1])) frame.frame_id = static_cast<std::int64_t>(*id);
        }
      }
      continue;
    }
    const auto toks = split_ws(sv);
    const std::string_view key = toks.front();
    auto rest = [&] {
      std::vector<std::string> v;
      for (std::size_t i = 1; i < toks.size(); ++i) v.emplace_back(toks[i]);
      return v;
    };
    if (key == "VERSION" || key == "VIEWPOINT") continue;
    if (key == "FIELDS") {
      fields = rest();
    } else if (key == "SIZE") {
      sizes = rest();
    } else if (key == "TYPE") {
      types = rest();
    } else if (key == "COUNT") {
      for (const auto& c : rest()) {
        if (c != "1") fail(ErrorCode::kUnsupportedLayout, "only COUNT 1 fields are supported");
      }
    } else if (key == "WIDTH" && toks.size() == 2) {
      width = parse_count(toks[1]);
    } else if (key == "HEIGHT" && toks.size() == 2) {
      height = parse_count(toks[1]);
    } else if (key == "POINTS" && toks.size() == 2) {
      points = parse_count(toks[1]);
    } else if (key == "DATA") {
      if (toks.size() != 2 || toks[1] != "ascii") {
        fail(ErrorCode::kUnsupportedLayout, "only DATA ascii is supported");
      }
      have_data = true;
      break;
    } else {
      fail(ErrorCode::kParseError, "unexpected header line '" + std::string(sv) + "'");
    }
  }
  if (!have_data) fail(ErrorCode::kParseError, "missing DATA line");

  const bool xyz = fields == std::vector<std::string>{"x", "y", "z"};
  const bool xyzi = fields == std::vector<std::string>{"x", "y", "z", "intensity"};
  if (!xyz && !xyzi) fail(ErrorCode::kUnsupportedLayout, "FIELDS must be 'x y z' or 'x y z intensity'");
  if (xyzi && types.size() == 4 && sizes.size() == 4 && types[3] == "U" && sizes[3] == "1") {
    frame.intensity_encoding = IntensityEncoding::kRaw8Bit;
  }

  std::size_t expected = 0;
  if (points) {
    expected = *points;
  } else if (width && height) {
    expected = *width * *height;
  } else {
    fail(ErrorCode::kParseError, "missing POINTS (or WIDTH/HEIGHT)");
  }

  const std::size_t ncols = fields.size();
  frame.points.reserve(expected);
  while (frame.points.size() < expected) {
    if (!std::getline(in, line)) {
      ++line_no;
      fail(ErrorCode::kParseError, "truncated data: expected " + std::to_string(expected) + " points, got " +
                                       std::to_string(frame.points.size()));
    }
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    const auto toks = split_ws(sv);
    if (toks.size() != ncols) {
      fail(ErrorCode::kParseError, "expected " + std::to_string(ncols) + " values, got " + std::to_string(toks.size()));
    }
    double v[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < ncols; ++i) {
      const auto d = parse_double(toks[i]);
      if (!d) fail(ErrorCode::kParseError, "bad number '" + std::string(toks[i]) + "'");
      v[i] = *d;
    }
    frame.points.push_back({v[0], v[1], v[2], v[3]});
  }
  return frame;
}

inline PointCloudFrame read_frame_pcd(const std::string& path) {
  auto in = open_in(path);
  return read_frame_pcd(in, path);
}

inline void write_frame_pcd(std::ostream& os, const PointCloudFrame& frame) {
  os << "# .PCD v0.7 - Point Cloud Data file format\n";
  os << "# timestamp " << format_double(frame.timestamp) << " frame_id " << frame.frame_id << '\n';
  os << "VERSION 0.7\nFIELDS x y z intensity\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n";
  os << "WIDTH " << frame.points.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\n";
  os << "POINTS " << frame.points.size() << "\nDATA ascii\n";
  for (const Point3& p : frame.points) {
    os << format_double(p.x) << ' ' << format_double(p.y) << ' ' << format_double(p.z) << ' '
       << format_double(p.intensity) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Generic header-keyed CSV.

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }

  std::size_t column(std::string_view name, const std::string& source) const {
    if (auto i = find(name)) return *i;
    throw Error(ErrorCode::kSchemaError, source + ": missing column '" + std::string(name) + "'");
  }
};

inline CsvTable read_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    for (auto c : split(line, ',')) cells.emplace_back(c);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::kSchemaError, source + ":" + std::to_string(line_no) + ": expected " +
                                               std::to_string(t.header.size()) + " columns, got " +
                                               std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (t.header.empty()) throw Error(ErrorCode::kSchemaError, source + ": empty CSV");
  return t;
}

inline double csv_number(const CsvTable& t, std::size_t row, std::size_t col, const std::string& source) {
  const auto v = parse_double(t.rows[row][col]);
  if (!v) {
    throw Error(ErrorCode::kSchemaError, source + ":" + std::to_string(t.line_numbers[row]) + ": bad number '" +
                                             t.rows[row][col] + "' in column '" + t.header[col] + "'");
  }
  return *v;
}

// ---------------------------------------------------------------------------
// Obstacle CSV.

inline constexpr std::string_view kObstacleCsvHeader =
    "frame_id,t,center_x,center_y,length,width,height,confidence,class,range";

struct FrameObstacles {
  std::int64_t frame_id = 0;
  double t = 0.0;
  std::vector<ObstacleEstimate> obstacles;
};

inline void write_obstacles_csv_header(std::ostream& os) { os << kObstacleCsvHeader << '\n'; }

inline void write_obstacles_csv_rows(std::ostream& os, std::int64_t frame_id, double t,
                                     const std::vector<ObstacleEstimate>& obstacles) {
  for (const ObstacleEstimate& o : obstacles) {
    std::string tag = o.class_tag;
    for (char& ch : tag) {
      if (ch == ',' || ch == '\n' || ch == '\r') ch = '_';
    }
    os << frame_id << ',' << format_double(t) << ',' << format_double(o.center_x) << ','
       << format_double(o.center_y) << ',' << format_double(o.length) << ',' << format_double(o.width) << ','
       << (o.height ? format_double(*o.height) : std::string()) << ',' << format_double(o.confidence) << ','
       << tag << ',' << format_double(o.range) << '\n';
  }
}

inline void write_obstacles_csv(std::ostream& os, const std::vector<FrameObstacles>& frames) {
  write_obstacles_csv_header(os);
  for (const FrameObstacles& f : frames) write_obstacles_csv_rows(os, f.frame_id, f.t, f.obstacles);
}

// Rows grouped by frame in order of first appearance.
inline std::vector<FrameObstacles> read_obstacles_csv(std::istream& in, const std::string& source = "<obstacles>") {
  const CsvTable t = read_csv(in, source);
  const std::size_t c_id = t.column("frame_id", source), c_t = t.column("t", source),
                    c_x = t.column("center_x", source), c_y = t.column("center_y", source),
                    c_l = t.column("length", source), c_w = t.column("width", source),
                    c_h = t.column("height", source), c_conf = t.column("confidence", source),
                    c_cls = t.column("class", source), c_r = t.column("range", source);
  std::vector<FrameObstacles> frames;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto id = static_cast<std::int64_t>(csv_number(t, i, c_id, source));
    const double ts = csv_number(t, i, c_t, source);
    if (frames.empty() || frames.back().frame_id != id) frames.push_back({id, ts, {}});
    ObstacleEstimate o;
    o.center_x = csv_number(t, i, c_x, source);
    o.center_y = csv_number(t, i, c_y, source);
    o.length = csv_number(t, i, c_l, source);
    o.width = csv_number(t, i, c_w, source);
    if (!t.rows[i][c_h].empty()) o.height = csv_number(t, i, c_h, source);
    o.confidence = csv_number(t, i, c_conf, source);
    o.class_tag = t.rows[i][c_cls];
    o.range = csv_number(t, i, c_r, source);
    frames.back().obstacles.push_back(std::move(o));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Evaluation inputs and outputs.

struct GeoReference {
  double lat = 0.0;
  double lon = 0.0;
};

// `t,X,Y` or `t,lat,lon` (the latter needs a reference), optional `psi`.
inline std::vector<TimedFix> read_truth_csv(std::istream& in, const std::optional<GeoReference>& ref,
                                            const std::string& source = "<truth>") {
  const CsvTable t = read_csv(in, source);
  const std::size_t c_t = t.column("t", source);
  const auto c_psi = t.find("psi");
  const bool planar = t.find("X") && t.find("Y");
  const bool geodetic = t.find("lat") && t.find("lon");
  if (!planar && !geodetic) {
    throw Error(ErrorCode::kSchemaError, source + ": expected header t,X,Y or t,lat,lon");
  }
  if (!planar && !ref) {
    throw Error(ErrorCode::kSchemaError, source + ": lat/lon truth needs eval.ref_lat and eval.ref_lon");
  }
  std::vector<TimedFix> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    TimedFix f;
    f.t = csv_number(t, i, c_t, source);
    if (planar) {
      f.pos = {csv_number(t, i, *t.find("X"), source), csv_number(t, i, *t.find("Y"), source)};
    } else {
      f.pos = geodetic_to_plane(csv_number(t, i, *t.find("lat"), source), csv_number(t, i, *t.find("lon"), source),
                                ref->lat, ref->lon);
    }
    if (c_psi) f.psi = csv_number(t, i, *c_psi, source);
    out.push_back(f);
  }
  return out;
}

inline std::vector<TimedPose> read_ego_csv(std::istream& in, const std::string& source = "<ego>") {
  const CsvTable t = read_csv(in, source);
  const std::size_t c_t = t.column("t", source), c_x = t.column("X", source), c_y = t.column("Y", source),
                    c_psi = t.column("psi", source);
  std::vector<TimedPose> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({csv_number(t, i, c_t, source),
                   {csv_number(t, i, c_x, source), csv_number(t, i, c_y, source),
                    normalize_angle(csv_number(t, i, c_psi, source))}});
  }
  return out;
}

inline void write_offset_csv(std::ostream& os, const OffsetStats& lon, const OffsetStats& lat) {
  os << "axis,delta,sigma,availability\n";
  for (const auto& [axis, s] : {std::pair{Axis::kLongitudinal, lon}, std::pair{Axis::kLateral, lat}}) {
    os << to_string(axis) << ',' << format_double(s.mean_offset) << ',' << format_double(s.std_dev) << ','
       << format_double(s.availability) << '\n';
  }
}

// Same row order as the usual dimension table: E[l], sigma_l, E[w], sigma_w.
inline void write_dimension_csv(std::ostream& os, const DimensionStats& d) {
  os << "E_l,sigma_l,E_w,sigma_w\n"
     << format_double(d.mean_length) << ',' << format_double(d.std_length) << ',' << format_double(d.mean_width)
     << ',' << format_double(d.std_width) << '\n';
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  os << "t,x_loc_gt,y_loc_gt,x_loc_est,y_loc_est\n";
  for (const ComparisonRow& r : rows) {
    os << format_double(r.t) << ',' << format_double(r.gt.x_loc) << ',' << format_double(r.gt.y_loc) << ','
       << (r.est ? format_double(r.est->x_loc) : std::string()) << ','
       << (r.est ? format_double(r.est->y_loc) : std::string()) << '\n';
  }
}

}  // namespace lod
