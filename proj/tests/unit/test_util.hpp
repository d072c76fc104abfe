#pragma once

#include <random>

#include "cot3d/geometry.hpp"
#include "cot3d/tensor.hpp"

namespace cot3d::testing {

inline Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t = Tensor::matrix(r, c);
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

inline PointCloud random_cloud(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  PointCloud pc;
  pc.shape_id = "random";
  for (std::size_t i = 0; i < n; ++i) pc.points.push_back({dist(rng), dist(rng), dist(rng)});
  return pc;
}

}  // namespace cot3d::testing
