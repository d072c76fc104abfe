#pragma once

#include <vector>

#include "cot3d/layers.hpp"
#include "cot3d/model_config.hpp"
#include "cot3d/vocab.hpp"

namespace cot3d {

// Token embeddings plus fixed sinusoidal positions, one residual
// self-attention block, masked mean-pool, linear projection to d', unit norm.
class TextEncoder {
 public:
  struct Cache {
    std::vector<int> ids;  // non-pad ids in order
    Tensor x;              // L×e input (embedding + position)
    Tensor q, k, v;
    Tensor attn;     // L×L softmax weights
    Tensor context;  // attn · v
    Tensor pooled;   // 1×e
    Tensor y;        // 1×d' before normalization
    Tensor z;        // 1×d'
    std::vector<double> norm;
  };

  TextEncoder() = default;
  TextEncoder(const ModelConfig& cfg, std::size_t vocab_size, Rng& rng);

  // ids as produced by tokenize(); pad positions are masked out. An all-pad
  // sequence raises DegenerateError.
  Tensor forward(const std::vector<int>& ids, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Tensor& dz);

  ParamList params();
  // Attention output and final projection: the `top_block` unfreeze set.
  ParamList top_block_params();

  std::size_t vocab_size() const { return embedding_.value.rows(); }
  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  ParamBlock embedding_;
  Linear query_, key_, value_, attn_out_;
  Linear out_proj_;
};

// Fixed sinusoidal position encoding for position `pos` at width `dim`.
void add_position_encoding(std::span<double> row, std::size_t pos);

inline Tensor encode_text(const std::vector<int>& ids, const TextEncoder& enc) { return enc.forward(ids); }

}  // namespace cot3d
