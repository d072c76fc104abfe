#include "cot3d/projection.hpp"

namespace cot3d {

Projection::Projection(const ModelConfig& cfg, Rng& rng)
    : cfg_(cfg),
      local_("proj.local", cfg.local_dim, cfg.embed_dim, cfg.embed_dim, rng),
      global_("proj.global", cfg.global_dim, cfg.embed_dim, cfg.embed_dim, rng),
      position_("proj.position", 6 * cfg.n_freq, cfg.embed_dim, cfg.embed_dim, rng),
      fusion_("proj.fusion", 3 * cfg.embed_dim, cfg.embed_dim, rng) {}

Tensor Projection::forward(const ShapeFeatures& sf, Cache* cache, BranchMask mask) const {
  if (sf.local.rank() != 2 || sf.local.cols() != cfg_.local_dim ||
      sf.global_e3d.size() != cfg_.global_dim || sf.key_coords.rows() != sf.local.rows()) {
    throw ConfigError("project: features local " + shape_string(sf.local.shape()) + ", global " +
                      shape_string(sf.global_e3d.shape()) + " do not match h=" +
                      std::to_string(cfg_.local_dim) + ", d=" + std::to_string(cfg_.global_dim));
  }
  Cache local_tmp;
  Cache* c = cache ? cache : &local_tmp;

  Tensor u_local = local_.forward(mean_rows(sf.local), &c->local);
  Tensor g = Tensor({1, cfg_.global_dim}, std::vector<double>(sf.global_e3d.data().begin(),
                                                              sf.global_e3d.data().end()));
  Tensor u_global = global_.forward(g, &c->global);
  Tensor u_pos = position_.forward(mean_rows(fourier_encode(sf.key_coords, cfg_.n_freq)),
                                   &c->position);
  if (!mask.local) u_local.fill(0.0);
  if (!mask.global) u_global.fill(0.0);
  if (!mask.position) u_pos.fill(0.0);

  const Tensor* parts[] = {&u_local, &u_global, &u_pos};
  c->fused_in = concat_cols(parts);
  c->y = fusion_.forward(c->fused_in);
  c->norm = row_norms(c->y);
  c->z = l2_normalize(c->y);
  c->keypoints = sf.local.rows();
  c->mask = mask;
  return c->z;
}

std::pair<Tensor, Tensor> Projection::backward(const Cache& c, const Tensor& dz) {
  const std::size_t dp = cfg_.embed_dim;
  Tensor dy = l2_normalize_backward(c.z, c.norm, dz);
  Tensor dfused = fusion_.backward(c.fused_in, dy);

  auto slice = [&](std::size_t off) {
    Tensor t = Tensor::matrix(1, dp);
    for (std::size_t j = 0; j < dp; ++j) t[j] = dfused(0, off + j);
    return t;
  };
  Tensor du_local = slice(0), du_global = slice(dp), du_pos = slice(2 * dp);
  if (!c.mask.local) du_local.fill(0.0);
  if (!c.mask.global) du_global.fill(0.0);
  if (!c.mask.position) du_pos.fill(0.0);

  Tensor dmean_local = local_.backward(c.local, du_local);
  Tensor d_global = global_.backward(c.global, du_global);
  position_.backward(c.position, du_pos);

  const std::size_t M = c.keypoints;
  Tensor d_local = Tensor::matrix(M, cfg_.local_dim);
  const double inv = 1.0 / static_cast<double>(M);
  for (std::size_t k = 0; k < M; ++k) {
    for (std::size_t j = 0; j < cfg_.local_dim; ++j) d_local(k, j) = dmean_local(0, j) * inv;
  }
  return {std::move(d_local), std::move(d_global)};
}

ParamList Projection::params() {
  ParamList out;
  for (Mlp* m : {&local_, &global_, &position_}) {
    for (ParamBlock* p : m->params()) out.push_back(p);
  }
  for (ParamBlock* p : fusion_.params()) out.push_back(p);
  return out;
}

}  // namespace cot3d
