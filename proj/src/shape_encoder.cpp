#include "cot3d/shape_encoder.hpp"

#include <limits>

namespace cot3d {

ShapeGeometry prepare_shape(const PointCloud& pc, const ModelConfig& cfg) {
  if (pc.size() < cfg.keypoints || pc.size() < cfg.neighbors) {
    throw CapacityError("encode_shape: cloud '" + pc.shape_id + "' has " +
                        std::to_string(pc.size()) + " points, needs at least " +
                        std::to_string(std::max(cfg.keypoints, cfg.neighbors)));
  }
  KeypointSet keys = farthest_point_sample(pc, cfg.keypoints, canonical_start(pc));
  ShapeGeometry g;
  g.groups = knn_group(pc, keys, cfg.neighbors);
  g.key_coords = Tensor::matrix(keys.size(), 3);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (int a = 0; a < 3; ++a) g.key_coords(i, a) = keys.coords[i][a];
  }
  return g;
}

ShapeEncoder::ShapeEncoder(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      point_mlp_("shape.point_mlp", 3, cfg.local_dim, cfg.local_dim, rng),
      global_mlp_("shape.global_mlp", 2 * cfg.local_dim, cfg.global_dim, cfg.global_dim, rng) {}

ShapeFeatures ShapeEncoder::forward(const ShapeGeometry& geom, Cache* cache) const {
  const std::size_t M = geom.groups.keypoints;
  const std::size_t m = geom.groups.per_group;
  const std::size_t h = cfg_.local_dim;

  Mlp::Cache point_cache;
  Tensor per_point = point_mlp_.forward(geom.groups.offsets, cache ? &point_cache : nullptr);

  ShapeFeatures out;
  out.local = Tensor::matrix(M, h);
  std::vector<std::size_t> group_argmax(M * h);
  for (std::size_t k = 0; k < M; ++k) {
    for (std::size_t c = 0; c < h; ++c) {
      std::size_t best = k * m;
      for (std::size_t j = 1; j < m; ++j) {
        if (per_point(k * m + j, c) > per_point(best, c)) best = k * m + j;
      }
      out.local(k, c) = per_point(best, c);
      group_argmax[k * h + c] = best;
    }
  }

  Tensor pooled = Tensor::matrix(1, 2 * h);
  std::vector<std::size_t> key_argmax(h, 0);
  for (std::size_t c = 0; c < h; ++c) {
    double sum = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      sum += out.local(k, c);
      if (out.local(k, c) > out.local(key_argmax[c], c)) key_argmax[c] = k;
    }
    pooled(0, c) = out.local(key_argmax[c], c);
    pooled(0, h + c) = sum / static_cast<double>(M);
  }

  Mlp::Cache global_cache;
  out.global_e3d = global_mlp_.forward(pooled, cache ? &global_cache : nullptr);
  out.key_coords = geom.key_coords;

  if (cache) {
    cache->point = std::move(point_cache);
    cache->global = std::move(global_cache);
    cache->group_argmax = std::move(group_argmax);
    cache->key_argmax = std::move(key_argmax);
    cache->keypoints = M;
  }
  return out;
}

void ShapeEncoder::backward(const Cache& cache, const Tensor& d_local, const Tensor& d_global) {
  const std::size_t M = cache.keypoints;
  const std::size_t h = cfg_.local_dim;
  if (d_local.rows() != M || d_local.cols() != h) {
    throw DimensionError("ShapeEncoder::backward: d_local has shape " +
                         shape_string(d_local.shape()));
  }
  Tensor d_pooled = global_mlp_.backward(cache.global, d_global);

  Tensor d_loc = d_local;
  const double inv_m = 1.0 / static_cast<double>(M);
  for (std::size_t c = 0; c < h; ++c) {
    d_loc(cache.key_argmax[c], c) += d_pooled(0, c);
    for (std::size_t k = 0; k < M; ++k) d_loc(k, c) += d_pooled(0, h + c) * inv_m;
  }

  Tensor d_point = Tensor::matrix(cache.point.x.rows(), h);
  for (std::size_t k = 0; k < M; ++k) {
    for (std::size_t c = 0; c < h; ++c) d_point(cache.group_argmax[k * h + c], c) += d_loc(k, c);
  }
  point_mlp_.backward(cache.point, d_point);
}

ShapeFeatures ShapeEncoder::encode(const PointCloud& pc) const {
  return forward(prepare_shape(pc, cfg_));
}

ParamList ShapeEncoder::params() {
  ParamList out = point_mlp_.params();
  for (ParamBlock* p : global_mlp_.params()) out.push_back(p);
  return out;
}

}  // namespace cot3d
