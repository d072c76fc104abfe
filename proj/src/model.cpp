#include "cot3d/model.hpp"

#include "cot3d/layers.hpp"

namespace cot3d {

Model Model::create(const ModelConfig& cfg, Vocab vocab, std::uint64_t seed) {
  Model m;
  m.cfg = cfg;
  m.vocab = std::move(vocab);
  Rng shape_rng(mix_seed(seed, 1));
  Rng text_rng(mix_seed(seed, 2));
  Rng proj_rng(mix_seed(seed, 3));
  m.shape = ShapeEncoder(cfg, shape_rng);
  m.text = TextEncoder(cfg, m.vocab.size(), text_rng);
  m.proj = Projection(cfg, proj_rng);
  m.temperature = Temperature(cfg.init_tau);
  return m;
}

ParamList Model::shape_side_params() {
  ParamList out = shape.params();
  for (ParamBlock* p : proj.params()) out.push_back(p);
  out.push_back(&temperature.log_tau);
  return out;
}

ParamList Model::text_params() { return text.params(); }

ParamList Model::params() {
  ParamList out = shape_side_params();
  for (ParamBlock* p : text_params()) out.push_back(p);
  return out;
}

ShapeGeometry Model::prepare(const PointCloud& pc) const {
  return prepare_shape(normalize_to_unit_sphere(pc), cfg);
}

std::vector<int> Model::token_ids(const std::string& text) const {
  return tokenize(text, vocab, cfg.max_len);
}

Tensor Model::embed_shape(const ShapeGeometry& geom) const { return proj.forward(shape.forward(geom)); }

Tensor Model::embed_shape(const PointCloud& pc) const { return embed_shape(prepare(pc)); }

Tensor Model::embed_text(const std::string& text) const { return this->text.forward(token_ids(text)); }

namespace {

Tensor stack_rows(const std::vector<Tensor>& rows, std::size_t width) {
  Tensor out = Tensor::matrix(rows.size(), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < width; ++c) out(i, c) = rows[i](0, c);
  }
  return out;
}

}  // namespace

Tensor Model::embed_shapes(const std::vector<PointCloud>& clouds) const {
  std::vector<Tensor> rows;
  for (const auto& pc : clouds) rows.push_back(embed_shape(pc));
  return stack_rows(rows, cfg.embed_dim);
}

Tensor Model::embed_texts(const std::vector<std::string>& texts) const {
  std::vector<Tensor> rows;
  for (const auto& t : texts) rows.push_back(embed_text(t));
  return stack_rows(rows, cfg.embed_dim);
}

}  // namespace cot3d
