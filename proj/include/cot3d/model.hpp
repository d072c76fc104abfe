#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cot3d/alignment.hpp"
#include "cot3d/geometry.hpp"
#include "cot3d/model_config.hpp"
#include "cot3d/projection.hpp"
#include "cot3d/shape_encoder.hpp"
#include "cot3d/text_encoder.hpp"
#include "cot3d/vocab.hpp"

namespace cot3d {

// Everything needed to embed shapes and texts into the shared space.
struct Model {
  ModelConfig cfg;
  Vocab vocab;
  ShapeEncoder shape;
  TextEncoder text;
  Projection proj;
  Temperature temperature;

  // Each module draws its init from its own stream of `seed`.
  static Model create(const ModelConfig& cfg, Vocab vocab, std::uint64_t seed);

  // Fixed order: shape encoder, projection, temperature, text encoder.
  ParamList params();
  ParamList shape_side_params();  // shape encoder + projection + temperature
  ParamList text_params();

  // Centres and scales the cloud to the unit sphere, then FPS + kNN.
  ShapeGeometry prepare(const PointCloud& pc) const;
  std::vector<int> token_ids(const std::string& text) const;

  Tensor embed_shape(const ShapeGeometry& geom) const;  // 1×d'
  Tensor embed_shape(const PointCloud& pc) const;
  Tensor embed_text(const std::string& text) const;  // 1×d'

  // Row-stacked embeddings.
  Tensor embed_shapes(const std::vector<PointCloud>& clouds) const;
  Tensor embed_texts(const std::vector<std::string>& texts) const;
};

}  // namespace cot3d
