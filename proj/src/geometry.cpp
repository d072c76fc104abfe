#include "cot3d/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cot3d/io.hpp"

namespace cot3d {

double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

namespace {

void require_valid(const PointCloud& pc, const char* what) {
  if (pc.points.empty()) throw DataError(std::string(what) + ": point cloud is empty");
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    for (double v : pc.points[i]) {
      if (!std::isfinite(v)) {
        throw DataError(std::string(what) + ": point " + std::to_string(i) +
                        " has a non-finite coordinate");
      }
    }
  }
}

}  // namespace

PointCloud normalize_to_unit_sphere(const PointCloud& pc) {
  require_valid(pc, "normalize_to_unit_sphere");
  Vec3 centroid{0, 0, 0};
  for (const auto& p : pc.points) {
    for (int a = 0; a < 3; ++a) centroid[a] += p[a];
  }
  const double n = static_cast<double>(pc.points.size());
  for (auto& c : centroid) c /= n;

  PointCloud out;
  out.shape_id = pc.shape_id;
  out.points.reserve(pc.points.size());
  double max_norm = 0.0;
  for (const auto& p : pc.points) {
    Vec3 q{p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
    max_norm = std::max(max_norm, std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2]));
    out.points.push_back(q);
  }
  if (max_norm > 0.0) {
    for (auto& q : out.points) {
      for (auto& v : q) v /= max_norm;
    }
  }
  return out;
}

std::size_t canonical_start(const PointCloud& pc) {
  if (pc.points.empty()) throw DataError("canonical_start: point cloud is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pc.points.size(); ++i) {
    if (pc.points[i] < pc.points[best]) best = i;
  }
  return best;
}

KeypointSet farthest_point_sample(const PointCloud& pc, std::size_t k, std::size_t start) {
  const std::size_t n = pc.points.size();
  if (k == 0) throw CapacityError("farthest_point_sample: k must be at least 1");
  if (k > n) {
    throw CapacityError("farthest_point_sample: k=" + std::to_string(k) + " exceeds N=" +
                        std::to_string(n));
  }
  if (start >= n) {
    throw RangeError("farthest_point_sample: start " + std::to_string(start) +
                     " out of range for N=" + std::to_string(n));
  }
  KeypointSet out;
  out.indices.reserve(k);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t current = start;
  for (std::size_t s = 0; s < k; ++s) {
    out.indices.push_back(current);
    out.coords.push_back(pc.points[current]);
    taken[current] = true;
    if (s + 1 == k) break;
    std::size_t next = n;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], squared_distance(pc.points[i], pc.points[current]));
      if (min_d[i] > best) {  // strict: lowest index wins ties
        best = min_d[i];
        next = i;
      }
    }
    current = next;
  }
  return out;
}

NeighborGroups knn_group(const PointCloud& pc, const KeypointSet& keys, std::size_t m) {
  const std::size_t n = pc.points.size();
  if (m == 0) throw CapacityError("knn_group: m must be at least 1");
  if (m > n) {
    throw CapacityError("knn_group: m=" + std::to_string(m) + " exceeds N=" + std::to_string(n));
  }
  NeighborGroups g;
  g.keypoints = keys.size();
  g.per_group = m;
  g.indices.reserve(keys.size() * m);
  g.offsets = Tensor::matrix(keys.size() * m, 3);

  std::vector<std::size_t> order(n);
  std::vector<double> dist(n);
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const Vec3& c = keys.coords[k];
    for (std::size_t i = 0; i < n; ++i) dist[i] = squared_distance(pc.points[i], c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                      });
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t idx = order[j];
      g.indices.push_back(idx);
      auto row = g.offsets.row(k * m + j);
      for (int a = 0; a < 3; ++a) row[a] = pc.points[idx][a] - c[a];
    }
  }
  return g;
}

Tensor fourier_encode(const Tensor& coords, std::size_t n_freq) {
  if (n_freq < 1) throw ConfigError("fourier_encode: n_freq must be at least 1");
  if (coords.rank() != 2 || coords.cols() != 3) {
    throw DimensionError("fourier_encode expects k×3 coordinates, got " +
                         shape_string(coords.shape()));
  }
  Tensor out = Tensor::matrix(coords.rows(), 6 * n_freq);
  for (std::size_t r = 0; r < coords.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t a = 0; a < 3; ++a) {
      double freq = std::numbers::pi;
      for (std::size_t j = 0; j < n_freq; ++j) {
        const double phase = freq * coords(r, a);
        row[a * 2 * n_freq + 2 * j] = std::sin(phase);
        row[a * 2 * n_freq + 2 * j + 1] = std::cos(phase);
        freq *= 2.0;
      }
    }
  }
  return out;
}

Tensor fourier_encode(const std::vector<Vec3>& coords, std::size_t n_freq) {
  Tensor t = Tensor::matrix(coords.size(), 3);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (int a = 0; a < 3; ++a) t(i, a) = coords[i][a];
  }
  return fourier_encode(t, n_freq);
}

// ---- file IO ----

PointFormat point_format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".ply") return PointFormat::kPlyAscii;
  if (ext == ".obj") return PointFormat::kObj;
  if (ext == ".xyz" || ext == ".txt") return PointFormat::kXyz;
  throw DataError("cannot infer point format from extension '" + ext + "'");
}

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_number(const std::string& tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("non-numeric field '" + tok + "'", line_no);
  }
  if (!std::isfinite(v)) throw ParseError("non-finite field '" + tok + "'", line_no);
  return v;
}

PointCloud parse_xyz(std::istream& in) {
  PointCloud pc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() != 3) {
      throw ParseError("expected 3 fields, found " + std::to_string(toks.size()), line_no);
    }
    pc.points.push_back({parse_number(toks[0], line_no), parse_number(toks[1], line_no),
                         parse_number(toks[2], line_no)});
  }
  return pc;
}

PointCloud parse_obj(std::istream& in) {
  PointCloud pc;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0] != "v") continue;
    // `v x y z [w]` and the common `v x y z r g b` colour extension.
    if (toks.size() != 4 && toks.size() != 5 && toks.size() != 7) {
      throw ParseError("vertex line has " + std::to_string(toks.size() - 1) + " fields", line_no);
    }
    pc.points.push_back({parse_number(toks[1], line_no), parse_number(toks[2], line_no),
                         parse_number(toks[3], line_no)});
  }
  return pc;
}

PointCloud parse_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", line_no ? line_no : 1);
  bool saw_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  bool saw_vertex = false;
  std::vector<std::string> vertex_props;
  // Elements declared before `vertex` are laid out first in the body.
  std::size_t rows_before_vertex = 0;
  std::vector<std::pair<std::string, std::size_t>> elements;

  while (true) {
    if (!next_line()) throw ParseError("unterminated header", line_no);
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0] == "end_header") break;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() != 3 || toks[1] != "ascii") {
        throw ParseError("only 'format ascii 1.0' is supported", line_no);
      }
      saw_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError("malformed element line", line_no);
      std::size_t count = static_cast<std::size_t>(parse_number(toks[2], line_no));
      elements.emplace_back(toks[1], count);
      in_vertex = toks[1] == "vertex";
      if (in_vertex) {
        saw_vertex = true;
        vertex_count = count;
      } else if (!saw_vertex) {
        rows_before_vertex += count;
      }
    } else if (toks[0] == "property") {
      if (in_vertex) {
        if (toks.size() != 3) throw ParseError("vertex properties must be scalar", line_no);
        vertex_props.push_back(toks[2]);
      }
    } else {
      throw ParseError("unknown header keyword '" + toks[0] + "'", line_no);
    }
  }
  if (!saw_format) throw ParseError("header lacks a format line", line_no);
  if (!saw_vertex) throw ParseError("header declares no vertex element", line_no);
  auto find_prop = [&](const char* name) {
    auto it = std::find(vertex_props.begin(), vertex_props.end(), name);
    if (it == vertex_props.end()) {
      throw ParseError(std::string("vertex element lacks property '") + name + "'", line_no);
    }
    return static_cast<std::size_t>(it - vertex_props.begin());
  };
  const std::size_t ix = find_prop("x"), iy = find_prop("y"), iz = find_prop("z");

  std::size_t skipped = 0;
  while (skipped < rows_before_vertex && next_line()) {
    if (!split_ws(line).empty()) ++skipped;
  }

  PointCloud pc;
  pc.points.reserve(vertex_count);
  while (pc.points.size() < vertex_count && next_line()) {
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != vertex_props.size()) {
      throw ParseError("vertex row has " + std::to_string(toks.size()) + " fields, expected " +
                           std::to_string(vertex_props.size()),
                       line_no);
    }
    pc.points.push_back({parse_number(toks[ix], line_no), parse_number(toks[iy], line_no),
                         parse_number(toks[iz], line_no)});
  }
  if (pc.points.size() != vertex_count) {
    throw ParseError("expected " + std::to_string(vertex_count) + " vertices, found " +
                         std::to_string(pc.points.size()),
                     line_no);
  }
  return pc;
}

PointCloud parse_stream(std::istream& in, PointFormat format) {
  switch (format) {
    case PointFormat::kPlyAscii:
      return parse_ply(in);
    case PointFormat::kObj:
      return parse_obj(in);
    case PointFormat::kXyz:
      return parse_xyz(in);
  }
  throw DataError("unknown point format");
}

}  // namespace

PointCloud parse_point_cloud(const std::string& text, PointFormat format, std::string shape_id) {
  std::istringstream in(text);
  PointCloud pc = parse_stream(in, format);
  if (pc.points.empty()) throw ParseError("file contains no points", 1);
  pc.shape_id = std::move(shape_id);
  return pc;
}

PointCloud load_point_cloud(const std::filesystem::path& path, PointFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open point file " + path.string());
  PointCloud pc = parse_stream(in, format);
  if (pc.points.empty()) throw ParseError("file contains no points", 1);
  pc.shape_id = path.stem().string();
  return pc;
}

std::string to_xyz_string(const PointCloud& pc) {
  std::string out;
  char buf[96];
  for (const auto& p : pc.points) {
    const int n = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

void write_xyz(const PointCloud& pc, const std::filesystem::path& path) {
  write_file_atomic(path, to_xyz_string(pc));
}

}  // namespace cot3d
