#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cli.hpp"
#include "cot3d/alignment.hpp"
#include "cot3d/cotformat.hpp"
#include "cot3d/dataset.hpp"
#include "cot3d/errors.hpp"
#include "cot3d/evalkit.hpp"
#include "cot3d/geometry.hpp"
#include "cot3d/shapes.hpp"
#include "cot3d/trainer.hpp"

#include <iostream>

namespace py = pybind11;
using namespace cot3d;

namespace {

py::dict annotation_to_dict(const CoTAnnotation& a) {
  py::dict d;
  d["object_recognition"] = a.object_recognition;
  d["functional_inference"] = a.functional_inference;
  d["causal_reasoning"] = a.causal_reasoning;
  d["conclusion"] = a.conclusion;
  return d;
}

CoTAnnotation annotation_from_dict(const py::dict& d) {
  auto get = [&](const char* k) { return d.contains(k) ? d[k].cast<std::string>() : std::string(); };
  return {get("object_recognition"), get("functional_inference"), get("causal_reasoning"), get("conclusion")};
}

py::dict record_to_dict(const DatasetRecord& r) {
  py::dict d;
  d["shape_id"] = r.shape_id;
  d["subset"] = std::string(subset_name(r.subset));
  d["split"] = std::string(split_name(r.split));
  d["format"] = std::string(format_name(r.format));
  d["text"] = r.text;
  d["gold"] = annotation_to_dict(r.gold);
  d["points"] = r.points;
  return d;
}

DatasetRecord record_from_dict(const py::dict& d) {
  DatasetRecord r;
  r.shape_id = d["shape_id"].cast<std::string>();
  r.subset = parse_subset(d["subset"].cast<std::string>());
  r.split = d.contains("split") ? parse_split(d["split"].cast<std::string>()) : Split::kUnassigned;
  r.format = parse_format(d["format"].cast<std::string>());
  r.text = d["text"].cast<std::string>();
  r.gold = annotation_from_dict(d["gold"].cast<py::dict>());
  r.points = d["points"].cast<std::vector<Vec3>>();
  return r;
}

std::vector<DatasetRecord> records_from_list(const py::list& l) {
  std::vector<DatasetRecord> out;
  for (const auto& item : l) out.push_back(record_from_dict(item.cast<py::dict>()));
  return out;
}

py::list records_to_list(const std::vector<DatasetRecord>& recs) {
  py::list l;
  for (const auto& r : recs) l.append(record_to_dict(r));
  return l;
}

Tensor matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DimensionError("empty matrix");
  Tensor t = Tensor::matrix(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw DimensionError("ragged matrix");
    std::copy(rows[i].begin(), rows[i].end(), t.row(i).begin());
  }
  return t;
}

py::object optional_score(const std::optional<double>& v) {
  return v ? py::object(py::float_(*v)) : py::object(py::none());
}

}  // namespace

PYBIND11_MODULE(_cot3d, m) {
  m.doc() = "cot3d core bindings";

  static PyObject* base = nullptr;
  static PyObject* data_error = nullptr;
  static PyObject* config_error = nullptr;
  static PyObject* validation_error = nullptr;
  static PyObject* checkpoint_error = nullptr;
  static PyObject* transport_error = nullptr;
  auto make = [&](const char* name, PyObject* parent) {
    PyObject* type = PyErr_NewException((std::string("cot3d.") + name).c_str(), parent, nullptr);
    m.add_object(name, py::handle(type));
    return type;
  };
  base = make("Error", PyExc_RuntimeError);
  data_error = make("DataError", base);
  config_error = make("ConfigError", base);
  validation_error = make("ValidationError", base);
  checkpoint_error = make("CheckpointError", base);
  transport_error = make("TransportError", base);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(validation_error, (e.code() + ": " + e.what()).c_str());
    } catch (const DataError& e) {
      PyErr_SetString(data_error, e.what());
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error, e.what());
    } catch (const CheckpointError& e) {
      PyErr_SetString(checkpoint_error, e.what());
    } catch (const TransportError& e) {
      PyErr_SetString(transport_error, e.what());
    } catch (const Error& e) {
      PyErr_SetString(base, e.what());
    }
  });

  m.def("render",
        [](const py::dict& ann, const std::string& fmt) { return render(annotation_from_dict(ann), parse_format(fmt)); },
        py::arg("annotation"), py::arg("format"), "Render an annotation as tagged, unmarked or none.");
  m.def("parse_tagged", [](const std::string& text) { return annotation_to_dict(parse_tagged(text)); },
        py::arg("text"));
  m.def("convert",
        [](const std::string& text, const std::string& from, const std::string& to) {
          return convert(text, parse_format(from), parse_format(to));
        },
        py::arg("text"), py::arg("source"), py::arg("target"));
  m.def("validate",
        [](const py::dict& ann, const std::string& fmt) {
          std::vector<std::pair<std::string, std::string>> out;
          for (const auto& v : validate(annotation_from_dict(ann), parse_format(fmt))) out.emplace_back(v.code, v.message);
          return out;
        },
        py::arg("annotation"), py::arg("format"), "List of (code, message) violations.");

  m.def("farthest_point_sample",
        [](const std::vector<Vec3>& points, std::size_t k, std::size_t start) {
          return farthest_point_sample(PointCloud{points, "py"}, k, start).indices;
        },
        py::arg("points"), py::arg("k"), py::arg("start") = 0);
  m.def("info_nce_loss",
        [](const std::vector<std::vector<double>>& z3d, const std::vector<std::vector<double>>& ztext, double tau) {
          return info_nce_loss(make_align_batch(matrix_from_rows(z3d), matrix_from_rows(ztext)), tau);
        },
        py::arg("z3d"), py::arg("ztext"), py::arg("tau"));
  m.def("lr_at",
        [](long step, long total, int stage) { return lr_at(step, total, default_train_config(stage)); },
        py::arg("step"), py::arg("total_steps"), py::arg("stage") = 1,
        "Learning rate under the default schedule of the given stage.");

  m.def("generate_shape",
        [](const std::string& family, std::uint64_t seed, const std::string& subset, std::size_t n_points) {
          Rng rng(seed);
          const ShapeSpec spec = sample_spec(parse_family(family), rng);
          const GeneratedShape g = generate_shape(spec, seed, parse_subset(subset), n_points);
          py::dict d;
          d["points"] = g.cloud.points;
          d["gold"] = annotation_to_dict(g.gold);
          return d;
        },
        py::arg("family"), py::arg("seed") = 42, py::arg("subset") = "cap3d_like", py::arg("n_points") = 512);
  m.def("build_dataset",
        [](std::size_t n_per_subset, std::uint64_t seed, std::vector<double> mix, std::size_t points) {
          if (mix.size() != 3) throw ConfigError("mix needs three weights");
          DatasetConfig dc;
          dc.n_per_subset = n_per_subset;
          dc.seed = seed;
          dc.mix = {mix[0], mix[1], mix[2]};
          dc.points_per_shape = points;
          return records_to_list(build_dataset(dc));
        },
        py::arg("n_per_subset") = 100, py::arg("seed") = 42,
        py::arg("mix") = std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}, py::arg("points_per_shape") = 512);
  m.def("split_dataset",
        [](const py::list& recs, std::uint64_t seed) {
          return records_to_list(split_dataset(records_from_list(recs), kDefaultRatios, seed));
        },
        py::arg("records"), py::arg("seed") = 42, "80/10/10 split grouped by shape_id.");
  m.def("read_records", [](const std::string& path) { return records_to_list(read_records(path)); }, py::arg("path"));
  m.def("write_records",
        [](const py::list& recs, const std::string& path) { write_records(records_from_list(recs), path); },
        py::arg("records"), py::arg("path"));

  m.def("score",
        [](const std::string& output, const py::dict& gold) {
          const EvalScores s = score_sample(interpret_output(output), annotation_from_dict(gold));
          py::dict d;
          d["obj"] = optional_score(s.obj);
          d["func"] = optional_score(s.func);
          d["inter"] = optional_score(s.inter);
          d["tru"] = s.tru;
          d["comp"] = s.comp;
          return d;
        },
        py::arg("output"), py::arg("gold"), "Dual-layer rubric scores; missing reasoning gives None.");

  m.def("train",
        [](const py::list& recs, const std::string& out, int stage, const std::optional<std::string>& init_ckpt,
           std::optional<std::size_t> epochs, std::optional<std::size_t> batch, std::uint64_t seed,
           const std::string& condition, const std::string& preset) {
          TrainConfig cfg = default_train_config(stage, parse_preset(preset));
          cfg.seed = seed;
          cfg.annotation_condition = parse_format(condition);
          if (epochs) cfg.epochs = *epochs;
          if (batch) cfg.batch_size = *batch;
          auto records = records_from_list(recs);
          Checkpoint ck;
          {
            py::gil_scoped_release release;
            if (stage == 1) {
              ck = train_stage1(cfg, records);
            } else {
              if (!init_ckpt) throw ConfigError("stage 2 needs init_checkpoint");
              const Checkpoint from = load_checkpoint(*init_ckpt);
              cfg.model = from.config.model;
              ck = train_stage2(cfg, from, records);
            }
            save_checkpoint(ck, out);
          }
          py::dict d;
          d["initial_loss"] = ck.initial_loss;
          d["final_loss"] = ck.final_loss;
          d["step"] = ck.step;
          d["epoch_losses"] = ck.epoch_losses;
          d["tau"] = ck.model.temperature.tau();
          return d;
        },
        py::arg("records"), py::arg("out"), py::arg("stage") = 1, py::arg("init_checkpoint") = py::none(),
        py::arg("epochs") = py::none(), py::arg("batch_size") = py::none(), py::arg("seed") = 42,
        py::arg("condition") = "tagged", py::arg("preset") = "lrm_like",
        "Train from the records' train split and save a checkpoint.");

  m.def("evaluate",
        [](const std::string& ckpt_path, const py::list& test, const std::optional<std::string>& condition) {
          auto records = records_from_list(test);
          const Checkpoint ck = load_checkpoint(ckpt_path);
          const AnnotationFormat cond = condition ? parse_format(*condition) : ck.config.annotation_condition;
          EvalRun run;
          {
            py::gil_scoped_release release;
            run = evaluate_model(ck.model, records, cond, std::string(preset_name(ck.config.model_preset)));
          }
          py::dict d;
          d["top1"] = run.retrieval.top1;
          d["top5"] = run.retrieval.top5;
          py::list outs;
          for (const auto& o : run.outputs) outs.append(o.text);
          d["outputs"] = outs;
          d["report"] = markdown_report({run.row});
          py::dict means;
          for (Metric metric : kAllMetrics) {
            const MetricSummary& s = run.row.metrics[static_cast<std::size_t>(metric)];
            means[py::str(std::string(metric_name(metric)))] =
                s.count ? py::object(py::float_(s.mean)) : py::object(py::none());
          }
          d["means"] = means;
          return d;
        },
        py::arg("checkpoint"), py::arg("test_records"), py::arg("condition") = py::none());

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::vector<const char*> argv{"cot3d"};
          for (const auto& a : args) argv.push_back(a.c_str());
          py::gil_scoped_release release;
          return cli::run(static_cast<int>(argv.size()), argv.data(), std::cout, std::cerr);
        },
        py::arg("args"), "Run the command-line tool in-process; returns the exit code.");
}
