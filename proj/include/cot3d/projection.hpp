#pragma once

#include "cot3d/layers.hpp"
#include "cot3d/model_config.hpp"
#include "cot3d/shape_encoder.hpp"

namespace cot3d {

// Selects which projector branches feed the fusion layer. Disabled branches
// contribute zeros; used for ablations.
struct BranchMask {
  bool local = true;
  bool global = true;
  bool position = true;
};

// Three projector MLPs (local, global, absolute position) fused by a linear
// layer over their concatenation, then normalized to the unit sphere.
class Projection {
 public:
  struct Cache {
    Mlp::Cache local, global, position;
    Tensor fused_in;  // 1×3d'
    Tensor y;         // 1×d'
    Tensor z;
    std::vector<double> norm;
    std::size_t keypoints = 0;
    BranchMask mask;
  };

  Projection() = default;
  Projection(const ModelConfig& cfg, Rng& rng);

  Tensor forward(const ShapeFeatures& sf, Cache* cache = nullptr, BranchMask mask = {}) const;
  // Returns d_local (M×h) and d_global (1×d) for the shape encoder.
  std::pair<Tensor, Tensor> backward(const Cache& cache, const Tensor& dz);

  ParamList params();
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  Mlp local_;
  Mlp global_;
  Mlp position_;
  Linear fusion_;
};

inline Tensor project(const ShapeFeatures& sf, const Projection& proj, BranchMask mask = {}) {
  return proj.forward(sf, nullptr, mask);
}

}  // namespace cot3d
