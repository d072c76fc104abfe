#include "cot3d/errors.hpp"
#include "cot3d/evalkit.hpp"
#include "cot3d/model.hpp"

namespace cot3d {

Tensor embed_pool(const Model& model, const std::vector<std::string>& pool) {
  if (pool.empty()) throw DataError("candidate pool is empty");
  return model.embed_texts(pool);
}

GeneratedOutput retrieve_as_generation(const Model& model, const PointCloud& shape,
                                       const std::vector<std::string>& pool, const Tensor& pool_z) {
  if (pool.empty()) throw DataError("candidate pool is empty");
  if (pool_z.rows() != pool.size()) throw DimensionError("pool embeddings do not match the pool");
  const Tensor z = model.embed_shape(shape);
  return interpret_output(pool[argmax_dot(z.row(0), pool_z)]);
}

GeneratedOutput retrieve_as_generation(const Model& model, const PointCloud& shape,
                                       const std::vector<std::string>& pool) {
  return retrieve_as_generation(model, shape, pool, embed_pool(model, pool));
}

EvalRun evaluate_model(const Model& model, const std::vector<DatasetRecord>& test,
                       AnnotationFormat condition, const std::string& preset_label) {
  if (test.empty()) throw DataError("test set is empty");
  std::vector<std::string> pool;
  std::vector<PointCloud> clouds;
  for (const auto& r : test) {
    pool.push_back(render(r.gold, condition));
    clouds.push_back({r.points, r.shape_id});
  }
  EvalRun run;
  const Tensor pool_z = embed_pool(model, pool);
  const Tensor shape_z = model.embed_shapes(clouds);
  for (std::size_t i = 0; i < test.size(); ++i) {
    GeneratedOutput out = interpret_output(pool[argmax_dot(shape_z.row(i), pool_z)]);
    run.scores.push_back(score_sample(out, test[i].gold));
    run.outputs.push_back(std::move(out));
    run.shape_ids.push_back(test[i].shape_id);
  }
  run.row = aggregate(run.scores, preset_label, std::string(format_name(condition)));
  run.retrieval = retrieval_metrics(shape_z, pool_z);
  return run;
}

}  // namespace cot3d
