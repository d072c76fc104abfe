#pragma once

#include "cot3d/geometry.hpp"
#include "cot3d/layers.hpp"
#include "cot3d/model_config.hpp"

namespace cot3d {

struct ShapeFeatures {
  Tensor local;       // M×h
  Tensor key_coords;  // M×3
  Tensor global_e3d;  // 1×d
};

// Parameter-independent part of shape encoding: canonical-start FPS and kNN
// grouping. Computed once per cloud and reused across training steps.
struct ShapeGeometry {
  NeighborGroups groups;
  Tensor key_coords;  // M×3
};

ShapeGeometry prepare_shape(const PointCloud& pc, const ModelConfig& cfg);

// FPS -> kNN groups -> shared per-point MLP on offsets -> per-group max-pool
// gives the local features; concat(max, mean) over keypoints -> MLP -> e_3D.
class ShapeEncoder {
 public:
  struct Cache {
    Mlp::Cache point;
    Mlp::Cache global;
    std::vector<std::size_t> group_argmax;  // M×h, row of the per-point output
    std::vector<std::size_t> key_argmax;    // h, keypoint index of the max
    std::size_t keypoints = 0;
  };

  ShapeEncoder() = default;
  ShapeEncoder(const ModelConfig& cfg, Rng& rng);

  ShapeFeatures forward(const ShapeGeometry& geom, Cache* cache = nullptr) const;
  // d_local: M×h, d_global: 1×d. Accumulates parameter gradients.
  void backward(const Cache& cache, const Tensor& d_local, const Tensor& d_global);

  // prepare_shape + forward.
  ShapeFeatures encode(const PointCloud& pc) const;

  ParamList params();
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Mlp point_mlp_;
  Mlp global_mlp_;
};

inline ShapeFeatures encode_shape(const PointCloud& pc, const ShapeEncoder& enc) { return enc.encode(pc); }

}  // namespace cot3d
