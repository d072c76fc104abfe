#pragma once

#include <cstddef>

namespace cot3d {

// Architecture sizes. None of these are fixed by the method itself; the
// defaults are the desk-scale choices.
struct ModelConfig {
  std::size_t keypoints = 32;    // M
  std::size_t neighbors = 8;     // m
  std::size_t local_dim = 64;    // h
  std::size_t global_dim = 128;  // d
  std::size_t token_dim = 64;    // e
  std::size_t embed_dim = 32;    // d'
  std::size_t max_len = 256;
  std::size_t min_freq = 1;
  std::size_t n_freq = 4;
  double init_tau = 0.07;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace cot3d
