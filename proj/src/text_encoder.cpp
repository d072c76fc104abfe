#include "cot3d/text_encoder.hpp"

#include <algorithm>
#include <cmath>

namespace cot3d {

void add_position_encoding(std::span<double> row, std::size_t pos) {
  const std::size_t dim = row.size();
  for (std::size_t i = 0; i < dim; i += 2) {
    const double angle =
        static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
    row[i] += std::sin(angle);
    if (i + 1 < dim) row[i + 1] += std::cos(angle);
  }
}

TextEncoder::TextEncoder(const ModelConfig& cfg, std::size_t vocab_size, Rng& rng)
    : cfg_(cfg),
      embedding_("text.embedding", uniform_init({vocab_size, cfg.token_dim}, 1, rng)),
      query_("text.attn.query", cfg.token_dim, cfg.token_dim, rng),
      key_("text.attn.key", cfg.token_dim, cfg.token_dim, rng),
      value_("text.attn.value", cfg.token_dim, cfg.token_dim, rng),
      attn_out_("text.attn.out", cfg.token_dim, cfg.token_dim, rng),
      out_proj_("text.out_proj", cfg.token_dim, cfg.embed_dim, rng) {}

Tensor TextEncoder::forward(const std::vector<int>& ids, Cache* cache) const {
  const std::size_t e = cfg_.token_dim;
  std::vector<int> kept;
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == Vocab::kPad) continue;
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab_size()) {
      throw RangeError("encode_text: token id " + std::to_string(ids[i]) + " out of range");
    }
    kept.push_back(ids[i]);
    positions.push_back(i);
  }
  if (kept.empty()) throw DegenerateError("encode_text: input contains only padding");

  // Attending only over the non-pad positions is the padding mask: masked
  // keys get zero weight and masked queries are excluded from the pool.
  const std::size_t L = kept.size();
  Tensor x = Tensor::matrix(L, e);
  for (std::size_t t = 0; t < L; ++t) {
    auto src = embedding_.value.row(static_cast<std::size_t>(kept[t]));
    auto dst = x.row(t);
    std::copy(src.begin(), src.end(), dst.begin());
    add_position_encoding(dst, positions[t]);
  }

  Tensor q = query_.forward(x);
  Tensor k = key_.forward(x);
  Tensor v = value_.forward(x);
  Tensor attn = matmul_nt(q, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(e));
  for (std::size_t i = 0; i < L; ++i) {
    auto r = attn.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (auto& s : r) {
      s *= scale;
      mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (auto& s : r) {
      s = std::exp(s - mx);
      sum += s;
    }
    for (auto& s : r) s /= sum;
  }
  Tensor context = matmul(attn, v);
  Tensor h = attn_out_.forward(context);
  add_inplace(h, x);
  Tensor pooled = mean_rows(h);
  Tensor y = out_proj_.forward(pooled);
  std::vector<double> norm = row_norms(y);
  Tensor z = l2_normalize(y);

  if (cache) {
    cache->ids = std::move(kept);
    cache->x = std::move(x);
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->context = std::move(context);
    cache->pooled = std::move(pooled);
    cache->y = std::move(y);
    cache->z = z;
    cache->norm = std::move(norm);
  }
  return z;
}

void TextEncoder::backward(const Cache& c, const Tensor& dz) {
  const std::size_t e = cfg_.token_dim;
  const std::size_t L = c.x.rows();
  Tensor dy = l2_normalize_backward(c.z, c.norm, dz);
  Tensor dpooled = out_proj_.backward(c.pooled, dy);

  Tensor dh = Tensor::matrix(L, e);
  const double inv_l = 1.0 / static_cast<double>(L);
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t j = 0; j < e; ++j) dh(t, j) = dpooled(0, j) * inv_l;
  }
  Tensor dx = dh;  // residual path
  Tensor dcontext = attn_out_.backward(c.context, dh);

  Tensor dattn = matmul_nt(dcontext, c.v);
  Tensor dv = matmul_tn(c.attn, dcontext);
  const double scale = 1.0 / std::sqrt(static_cast<double>(e));
  Tensor dscores = Tensor::matrix(L, L);
  for (std::size_t i = 0; i < L; ++i) {
    const double inner = dot(dattn.row(i), c.attn.row(i));
    for (std::size_t j = 0; j < L; ++j) {
      dscores(i, j) = c.attn(i, j) * (dattn(i, j) - inner) * scale;
    }
  }
  Tensor dq = matmul(dscores, c.k);
  Tensor dk = matmul_tn(dscores, c.q);

  add_inplace(dx, query_.backward(c.x, dq));
  add_inplace(dx, key_.backward(c.x, dk));
  add_inplace(dx, value_.backward(c.x, dv));

  for (std::size_t t = 0; t < L; ++t) {
    auto g = embedding_.grad.row(static_cast<std::size_t>(c.ids[t]));
    auto src = dx.row(t);
    for (std::size_t j = 0; j < e; ++j) g[j] += src[j];
  }
}

ParamList TextEncoder::params() {
  ParamList out{&embedding_};
  for (Linear* l : {&query_, &key_, &value_, &attn_out_, &out_proj_}) {
    for (ParamBlock* p : l->params()) out.push_back(p);
  }
  return out;
}

ParamList TextEncoder::top_block_params() {
  return {&attn_out_.weight, &attn_out_.bias, &out_proj_.weight, &out_proj_.bias};
}

}  // namespace cot3d
