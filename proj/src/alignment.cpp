#include "cot3d/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cot3d {

AlignBatch make_align_batch(Tensor z3d, Tensor ztext) {
  if (z3d.rank() != 2 || ztext.rank() != 2 || z3d.shape() != ztext.shape()) {
    throw DimensionError("align batch shapes differ: " + shape_string(z3d.shape()) + " vs " +
                         shape_string(ztext.shape()));
  }
  if (z3d.rows() == 0) throw DataError("align batch is empty");
  for (const Tensor* t : {&z3d, &ztext}) {
    for (std::size_t i = 0; i < t->rows(); ++i) {
      const double n = l2_norm(t->row(i));
      if (std::abs(n - 1.0) > 1e-6) {
        throw DataError("align batch row " + std::to_string(i) + " has norm " + std::to_string(n));
      }
    }
  }
  return {std::move(z3d), std::move(ztext)};
}

Temperature::Temperature(double tau) : log_tau("temperature.log_tau", Tensor::vector(1)) {
  if (!(tau > 0.0)) throw RangeError("temperature must be positive");
  log_tau.value[0] = std::log(tau);
  clamp();
}

double Temperature::tau() const { return std::exp(log_tau.value[0]); }

void Temperature::clamp() {
  log_tau.value[0] = std::clamp(log_tau.value[0], std::log(kMinTau), std::log(kMaxTau));
}

namespace {

// Softmax cross-entropy of row `i` of `s` against target `i`; if `probs` is
// given it receives the softmax row.
double row_ce(const Tensor& s, std::size_t i, std::span<double> probs) {
  auto r = s.row(i);
  const double mx = *std::max_element(r.begin(), r.end());
  double sum = 0.0;
  for (double v : r) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  if (!probs.empty()) {
    for (std::size_t j = 0; j < r.size(); ++j) probs[j] = std::exp(r[j] - lse);
  }
  return lse - r[i];
}

Tensor transpose(const Tensor& t) {
  Tensor out = Tensor::matrix(t.cols(), t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    for (std::size_t j = 0; j < t.cols(); ++j) out(j, i) = t(i, j);
  }
  return out;
}

}  // namespace

InfoNceResult info_nce(const Tensor& z3d, const Tensor& ztext, double log_tau, bool with_grad) {
  if (z3d.rank() != 2 || z3d.shape() != ztext.shape()) {
    throw DimensionError("info_nce: shapes differ: " + shape_string(z3d.shape()) + " vs " +
                         shape_string(ztext.shape()));
  }
  const std::size_t B = z3d.rows();
  if (B == 0) throw DataError("info_nce: empty batch");
  const double inv_tau = std::exp(-log_tau);

  Tensor s = matmul_nt(z3d, ztext);
  for (auto& v : s.data()) v *= inv_tau;
  Tensor st = transpose(s);

  Tensor p_row = Tensor::matrix(B, B);
  Tensor p_col = Tensor::matrix(B, B);  // p_col(j, i): softmax over i of column j
  double row_loss = 0.0, col_loss = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    row_loss += row_ce(s, i, with_grad ? p_row.row(i) : std::span<double>{});
    col_loss += row_ce(st, i, with_grad ? p_col.row(i) : std::span<double>{});
  }
  const double inv_b = 1.0 / static_cast<double>(B);
  InfoNceResult out;
  out.loss = 0.5 * (row_loss + col_loss) * inv_b;
  if (!with_grad) return out;

  // dL/dS(i,j) = (p_row(i,j) + p_col(j,i) - 2·[i==j]) / (2B)
  Tensor ds = Tensor::matrix(B, B);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < B; ++j) {
      ds(i, j) = 0.5 * inv_b * (p_row(i, j) + p_col(j, i) - (i == j ? 2.0 : 0.0));
    }
  }
  double d_log_tau = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) d_log_tau -= ds[i] * s[i];
  out.d_log_tau = d_log_tau;
  for (auto& v : ds.data()) v *= inv_tau;
  out.d_z3d = matmul(ds, ztext);
  out.d_ztext = matmul_tn(ds, z3d);
  return out;
}

double info_nce_loss(const AlignBatch& batch, double tau) {
  if (!(tau > 0.0)) throw RangeError("info_nce_loss: tau must be positive");
  if (batch.z3d.rows() == 0) throw DataError("info_nce_loss: empty batch");
  return info_nce(batch.z3d, batch.ztext, std::log(tau), false).loss;
}

std::size_t argmax_dot(std::span<const double> query, const Tensor& candidates) {
  if (candidates.rows() == 0) throw DataError("argmax_dot: no candidates");
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < candidates.rows(); ++j) {
    const double sc = dot(query, candidates.row(j));
    if (sc > best_score) {
      best_score = sc;
      best = j;
    }
  }
  return best;
}

RetrievalMetrics retrieval_metrics(const Tensor& z3d, const Tensor& ztext) {
  if (z3d.rows() == 0 || z3d.rows() != ztext.rows()) {
    throw DimensionError("retrieval_metrics: need matching non-empty matrices, got " +
                         shape_string(z3d.shape()) + " and " + shape_string(ztext.shape()));
  }
  const std::size_t Q = z3d.rows();
  Tensor s = matmul_nt(z3d, ztext);
  std::size_t hit1 = 0, hit5 = 0;
  for (std::size_t i = 0; i < Q; ++i) {
    // Rank of the true match: candidates strictly better, or equal with a lower index.
    std::size_t rank = 0;
    for (std::size_t j = 0; j < Q; ++j) {
      if (j == i) continue;
      if (s(i, j) > s(i, i) || (s(i, j) == s(i, i) && j < i)) ++rank;
    }
    if (rank < 1) ++hit1;
    if (rank < 5) ++hit5;
  }
  return {static_cast<double>(hit1) / static_cast<double>(Q),
          static_cast<double>(hit5) / static_cast<double>(Q)};
}

}  // namespace cot3d
