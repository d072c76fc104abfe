#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "cot3d/tensor.hpp"

namespace cot3d {

using Vec3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Vec3> points;
  std::string shape_id;

  std::size_t size() const { return points.size(); }
};

struct KeypointSet {
  std::vector<std::size_t> indices;
  std::vector<Vec3> coords;

  std::size_t size() const { return indices.size(); }
};

// Offsets of the m nearest neighbours of each keypoint, keypoint-major:
// row k*m + j is neighbour j of keypoint k, relative to that keypoint.
struct NeighborGroups {
  std::size_t keypoints = 0;
  std::size_t per_group = 0;
  std::vector<std::size_t> indices;  // keypoints * per_group
  Tensor offsets;                    // (keypoints * per_group) × 3

  std::span<const double> offset(std::size_t k, std::size_t j) const {
    return offsets.row(k * per_group + j);
  }
};

double squared_distance(const Vec3& a, const Vec3& b);

// Centroid to the origin, farthest point to norm 1. A cloud whose points all
// coincide maps to zeros with scale 1.
PointCloud normalize_to_unit_sphere(const PointCloud& pc);

// Index of the lexicographically smallest (x, y, z); ties go to the lowest index.
std::size_t canonical_start(const PointCloud& pc);

// Greedy max-min sampling. Ties go to the lowest index.
KeypointSet farthest_point_sample(const PointCloud& pc, std::size_t k, std::size_t start);

// m nearest points to each keypoint (keypoint included, ties by lowest index).
NeighborGroups knn_group(const PointCloud& pc, const KeypointSet& keys, std::size_t m);

// Per axis a and frequency j: columns a*2n + 2j and a*2n + 2j + 1 hold
// sin(2^j π x_a) and cos(2^j π x_a).
Tensor fourier_encode(const Tensor& coords, std::size_t n_freq);
Tensor fourier_encode(const std::vector<Vec3>& coords, std::size_t n_freq);

enum class PointFormat { kPlyAscii, kObj, kXyz };

PointFormat point_format_from_path(const std::filesystem::path& path);
PointCloud load_point_cloud(const std::filesystem::path& path, PointFormat format);
PointCloud parse_point_cloud(const std::string& text, PointFormat format,
                             std::string shape_id = {});
void write_xyz(const PointCloud& pc, const std::filesystem::path& path);
std::string to_xyz_string(const PointCloud& pc);

}  // namespace cot3d
