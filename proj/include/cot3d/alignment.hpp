#pragma once

#include "cot3d/tensor.hpp"

namespace cot3d {

// Row i of z3d is paired with row i of ztext. Both B×d', unit rows.
struct AlignBatch {
  Tensor z3d;
  Tensor ztext;
};

// Validates shapes and unit norms (within 1e-6).
AlignBatch make_align_batch(Tensor z3d, Tensor ztext);

inline constexpr double kMinTau = 1e-3;
inline constexpr double kMaxTau = 10.0;

// Learnable temperature stored as log(tau).
struct Temperature {
  ParamBlock log_tau;

  Temperature() : Temperature(0.07) {}
  explicit Temperature(double tau);

  double tau() const;
  // Pulls tau back into [kMinTau, kMaxTau] after an optimizer step.
  void clamp();
};

struct InfoNceResult {
  double loss = 0.0;
  Tensor d_z3d;
  Tensor d_ztext;
  double d_log_tau = 0.0;
};

// Symmetric InfoNCE on S = z3d·ztextᵀ / exp(log_tau): half the sum of the
// mean row-wise and mean column-wise cross-entropies against the diagonal.
// No normalization checks, so it can be differentiated freely.
InfoNceResult info_nce(const Tensor& z3d, const Tensor& ztext, double log_tau,
                       bool with_grad = true);

double info_nce_loss(const AlignBatch& batch, double tau);

struct RetrievalMetrics {
  double top1 = 0.0;
  double top5 = 0.0;
};

// Ranks every text row for each shape row by dot product, ties to the
// lowest index. Hit@k iff the matching row is among the k best.
RetrievalMetrics retrieval_metrics(const Tensor& z3d, const Tensor& ztext);

// Index of the best-scoring candidate row for `query` (ties to lowest index).
std::size_t argmax_dot(std::span<const double> query, const Tensor& candidates);

}  // namespace cot3d
