#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cot3d/annotator.hpp"
#include "cot3d/dataset.hpp"
#include "cot3d/errors.hpp"
#include "cot3d/evalkit.hpp"
#include "cot3d/io.hpp"
#include "cot3d/mock_server.hpp"
#include "cot3d/trainer.hpp"

namespace cot3d::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string suggest_flag(const std::string& unknown, const CLI::App& app) {
  std::string best;
  std::size_t best_d = std::string::npos;
  const std::string bare = unknown.substr(0, unknown.find('='));
  for (const CLI::Option* opt : app.get_options()) {
    for (const auto& name : opt->get_lnames()) {
      const std::string flag = "--" + name;
      const std::size_t d = edit_distance(bare, flag);
      if (d < best_d) {
        best_d = d;
        best = flag;
      }
    }
  }
  return best_d <= 3 ? best : "";
}

FormatMix parse_mix(const std::string& s) {
  std::vector<double> w;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      w.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("--mix expects three numbers tagged,unmarked,none; got '" + s + "'");
    }
  }
  if (w.size() != 3) throw UsageError("--mix expects three weights tagged,unmarked,none");
  return {w[0], w[1], w[2]};
}

AnnotationFormat parse_condition(const std::string& s) {
  auto f = try_parse_format(s);
  if (!f) throw UsageError("unknown format '" + s + "' (none|unmarked|tagged)");
  return *f;
}

void print_resolved(std::ostream& err, const std::string& cmd,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  err << "[cot3d] " << cmd << " resolved config:\n";
  for (const auto& [k, v] : kv) err << "  " << k << "=" << v << "\n";
}

fs::path sibling_with_extension(const fs::path& p, const std::string& ext) {
  fs::path out = p;
  out.replace_extension(ext);
  return out;
}

std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"cot3d: synthetic 3D chain-of-thought benchmark, alignment training and evaluation"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::uint64_t seed = 42;
  std::string config_path, in_path, out_path, to_fmt, ckpt_path, test_path, report_path;
  std::string endpoint, condition, preset, mix = "0.3333333333333333,0.3333333333333333,0.3333333333333334";
  std::size_t n = 100, points = kDefaultPointsPerShape, workers = 1, concurrency = 4;
  std::optional<std::size_t> epochs, batch;
  std::optional<double> lr;
  int stage = 1, port = 0;
  double fraction = 0.20;
  std::vector<std::string> report_inputs;
  std::string judge_endpoint;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "Seed for every random choice"); };

  CLI::App* gen = app.add_subcommand("gen", "Generate both subsets and the train/val/test splits");
  add_seed(gen);
  gen->add_option("--n", n, "Shapes per subset (>= 10)");
  gen->add_option("--out", out_path, "Output directory")->default_str("data");
  gen->add_option("--mix", mix, "Format weights tagged,unmarked,none");
  gen->add_option("--points", points, "Points per shape");
  gen->add_option("--workers", workers, "Generation threads (output does not depend on it)");

  CLI::App* conv = app.add_subcommand("convert", "Re-render every record in another format");
  conv->add_option("--in", in_path, "Input JSONL")->required();
  conv->add_option("--to", to_fmt, "Target format: none|unmarked|tagged")->required();
  conv->add_option("--out", out_path, "Output JSONL")->required();

  CLI::App* val = app.add_subcommand("validate", "Check records against their gold annotations");
  val->add_option("--in", in_path, "Input JSONL")->required();

  CLI::App* train = app.add_subcommand("train", "Stage-1 or stage-2 contrastive training");
  add_seed(train);
  train->add_option("--stage", stage, "1 (text frozen) or 2 (text unfrozen per policy)");
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--in", in_path, "Records JSONL; its train split is used")->required();
  train->add_option("--ckpt", ckpt_path, "Stage-1 checkpoint to continue from (stage 2)");
  train->add_option("--out", out_path, "Output checkpoint path")->required();
  train->add_option("--condition", condition, "Training text format: none|unmarked|tagged");
  train->add_option("--preset", preset, "lrm_like|llm_like");
  train->add_option("--epochs", epochs, "Override epochs");
  train->add_option("--batch", batch, "Override batch size");
  train->add_option("--lr", lr, "Override peak learning rate");

  CLI::App* eval = app.add_subcommand("eval", "Retrieval-as-generation evaluation of a checkpoint");
  eval->add_option("--ckpt", ckpt_path, "Checkpoint")->required();
  eval->add_option("--test", test_path, "Test records JSONL")->required();
  eval->add_option("--report", report_path, "Markdown report path (rows also go to .jsonl)")->required();
  eval->add_option("--condition", condition, "Pool text format (default: the checkpoint's)");
  eval->add_option("--preset", preset, "Row label (default: the checkpoint's)");
  eval->add_option("--judge", judge_endpoint, "Score with a remote judge instead of the rubric");
  eval->add_option("--concurrency", concurrency, "Remote judge requests in flight");

  CLI::App* report = app.add_subcommand("report", "Merge aggregate rows into one markdown table");
  report->add_option("--in", report_inputs, "Row JSONL files")->required();
  report->add_option("--report", report_path, "Markdown output")->required();

  CLI::App* annotate = app.add_subcommand("annotate", "Fetch gold annotations from a remote annotator");
  annotate->add_option("--in", in_path, "Records JSONL")->required();
  annotate->add_option("--out", out_path, "Output JSONL")->required();
  annotate->add_option("--endpoint", endpoint, "Annotator URL (default: $COT3D_ANNOTATOR_URL)");
  annotate->add_option("--concurrency", concurrency, "Requests in flight");

  CLI::App* review = app.add_subcommand("review-manifest", "Sample records for manual review");
  add_seed(review);
  review->add_option("--in", in_path, "Records JSONL")->required();
  review->add_option("--out", out_path, "Manifest path (one shape_id per line)")->required();
  review->add_option("--fraction", fraction, "Fraction in (0, 1]");

  CLI::App* mock = app.add_subcommand("mock-server", "Serve the bundled mock annotator and judge");
  mock->add_option("--port", port, "Port (0 picks a free one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ExtrasError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* scope = &app;
    for (const CLI::App* sub : app.get_subcommands()) scope = sub;
    for (int i = 1; i < argc; ++i) {
      const std::string a = argv[i];
      if (a.rfind("--", 0) != 0) continue;
      const std::string bare = a.substr(0, a.find('='));
      bool known = false;
      for (const CLI::Option* opt : scope->get_options()) {
        for (const auto& ln : opt->get_lnames()) known |= ("--" + ln) == bare;
      }
      if (known) continue;
      const std::string s = suggest_flag(a, *scope);
      err << "unknown flag " << bare;
      if (!s.empty()) err << "; did you mean " << s << "?";
      err << "\n";
    }
    return 2;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    if (*gen) {
      const fs::path dir = out_path.empty() ? fs::path("data") : fs::path(out_path);
      DatasetConfig dc;
      dc.n_per_subset = n;
      dc.mix = parse_mix(mix);
      dc.seed = seed;
      dc.points_per_shape = points;
      dc.workers = workers;
      print_resolved(err, "gen", {{"n", std::to_string(n)}, {"seed", std::to_string(seed)},
                                  {"out", dir.string()}, {"mix", mix},
                                  {"points", std::to_string(points)},
                                  {"workers", std::to_string(workers)}});
      const auto recs = split_dataset(build_dataset(dc), kDefaultRatios, seed);
      for (Subset s : {Subset::kCap3dLike, Subset::kGapartnetLike}) {
        std::vector<DatasetRecord> part;
        for (const auto& r : recs) {
          if (r.subset == s) part.push_back(r);
        }
        write_records(part, dir / (std::string(subset_name(s)) + ".jsonl"));
      }
      for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
        const auto part = select_split(recs, s);
        write_records(part, dir / (std::string(split_name(s)) + ".jsonl"));
        err << "[cot3d] " << split_name(s) << ": " << part.size() << " records\n";
      }
      return 0;
    }

    if (*conv) {
      const AnnotationFormat to = parse_condition(to_fmt);
      print_resolved(err, "convert", {{"in", in_path}, {"to", std::string(format_name(to))}, {"out", out_path}});
      auto recs = read_records(in_path);
      for (auto& r : recs) {
        // Tagged text converts directly; the other renderings lost their stage
        // boundaries, so they are re-rendered from the structured gold.
        r.text = r.format == AnnotationFormat::kTagged
                     ? convert(r.text, AnnotationFormat::kTagged, to)
                     : render(r.gold, to);
        r.format = to;
      }
      write_records(recs, out_path);
      err << "[cot3d] converted " << recs.size() << " records\n";
      return 0;
    }

    if (*val) {
      print_resolved(err, "validate", {{"in", in_path}});
      const auto recs = read_records(in_path);
      std::size_t bad = 0;
      std::set<std::string> ids;
      for (const auto& r : recs) {
        if (!ids.insert(r.shape_id).second) {
          ++bad;
          out << r.shape_id << "\tDUPLICATE_ID\n";
        }
        for (const auto& v : validate(r.gold, r.format)) {
          ++bad;
          out << r.shape_id << "\t" << v.code << "\t" << v.message << "\n";
        }
        try {
          if (render(r.gold, r.format) != r.text) {
            ++bad;
            out << r.shape_id << "\tTEXT_MISMATCH\ttext differs from the rendered gold\n";
          }
        } catch (const ValidationError&) {
        }
      }
      err << "[cot3d] " << recs.size() << " records, " << bad << " problems\n";
      return bad == 0 ? 0 : 1;
    }

    if (*train) {
      if (stage != 1 && stage != 2) throw UsageError("--stage must be 1 or 2");
      TrainConfig cfg;
      if (!config_path.empty()) {
        cfg = parse_train_config(read_file(config_path));
        if (train->count("--stage") && cfg.stage != stage) {
          throw UsageError("--stage conflicts with stage in " + config_path);
        }
      } else {
        cfg = default_train_config(stage, preset.empty() ? ModelPreset::kLrmLike : parse_preset(preset));
      }
      if (!preset.empty()) {
        cfg.model_preset = parse_preset(preset);
        if (cfg.stage == 2 && config_path.empty()) cfg.unfreeze_policy = default_policy(cfg.model_preset);
      }
      if (train->count("--seed")) cfg.seed = seed;
      if (!condition.empty()) cfg.annotation_condition = parse_condition(condition);
      if (epochs) cfg.epochs = *epochs;
      if (batch) cfg.batch_size = *batch;
      if (lr) cfg.learning_rate = *lr;
      validate_train_config(cfg);

      std::optional<Checkpoint> from;
      if (cfg.stage == 2) {
        if (ckpt_path.empty()) throw UsageError("stage 2 needs --ckpt");
        from = load_checkpoint(ckpt_path);
        cfg.model = from->config.model;
      }
      err << "[cot3d] train resolved config:\n" << train_config_to_text(cfg);
      const auto recs = read_records(in_path);
      auto progress = [&](std::size_t e, double loss) {
        err << "[cot3d] epoch " << e + 1 << "/" << cfg.epochs << " loss " << loss << "\n";
      };
      const Checkpoint ck = cfg.stage == 1 ? train_stage1(cfg, recs, progress)
                                           : train_stage2(cfg, *from, recs, progress);
      save_checkpoint(ck, out_path);
      err << "[cot3d] loss " << ck.initial_loss << " -> " << ck.final_loss << ", step " << ck.step
          << ", tau " << ck.model.temperature.tau() << "\n";
      return 0;
    }

    if (*eval) {
      const Checkpoint ck = load_checkpoint(ckpt_path);
      const AnnotationFormat cond =
          condition.empty() ? ck.config.annotation_condition : parse_condition(condition);
      const std::string label = preset.empty() ? std::string(preset_name(ck.config.model_preset)) : preset;
      print_resolved(err, "eval", {{"ckpt", ckpt_path}, {"test", test_path}, {"report", report_path},
                                   {"condition", std::string(format_name(cond))}, {"preset", label},
                                   {"judge", judge_endpoint.empty() ? "rubric" : judge_endpoint}});
      auto test = read_records(test_path);
      EvalRun run = evaluate_model(ck.model, test, cond, label);
      if (!judge_endpoint.empty()) {
        RemoteConfig rc;
        rc.endpoint = judge_endpoint;
        std::vector<JudgeItem> items;
        for (std::size_t i = 0; i < test.size(); ++i) items.push_back({run.outputs[i], test[i].gold});
        run.scores = judge_many(rc, items, "lexical-v1", concurrency);
        run.row = aggregate(run.scores, label, std::string(format_name(cond)));
      }
      write_file_atomic(report_path, markdown_report({run.row}));
      write_file_atomic(sibling_with_extension(report_path, ".jsonl"), rows_to_jsonl({run.row}));
      err << "[cot3d] retrieval top1 " << run.retrieval.top1 << " top5 " << run.retrieval.top5
          << " over " << test.size() << " shapes\n";
      return 0;
    }

    if (*report) {
      std::string joined;
      for (const auto& p : report_inputs) joined += p + " ";
      print_resolved(err, "report", {{"in", joined}, {"report", report_path}});
      std::vector<AggregateRow> rows;
      for (const auto& p : report_inputs) {
        for (auto& r : rows_from_jsonl(read_file(p))) rows.push_back(std::move(r));
      }
      if (rows.empty()) throw DataError("no aggregate rows in the inputs");
      write_file_atomic(report_path, markdown_report(rows));
      return 0;
    }

    if (*annotate) {
      if (endpoint.empty()) {
        if (const char* env = std::getenv("COT3D_ANNOTATOR_URL")) endpoint = env;
      }
      if (endpoint.empty()) throw UsageError("annotate needs --endpoint or COT3D_ANNOTATOR_URL");
      print_resolved(err, "annotate", {{"in", in_path}, {"out", out_path}, {"endpoint", endpoint},
                                       {"concurrency", std::to_string(concurrency)}});
      auto recs = read_records(in_path);
      RemoteConfig rc;
      rc.endpoint = endpoint;
      const auto replies = ordered_parallel_map<AnnotatorResponse>(
          recs.size(), concurrency, [&](std::size_t i) {
            const Family fam = family_from_shape_id(recs[i].shape_id);
            return request_annotation(rc, {recs[i].shape_id, fam, default_parts(fam), recs[i].format});
          });
      for (std::size_t i = 0; i < recs.size(); ++i) {
        recs[i].gold = replies[i].annotation;
        recs[i].text = render(recs[i].gold, recs[i].format);
      }
      write_records(recs, out_path);
      err << "[cot3d] annotated " << recs.size() << " records\n";
      return 0;
    }

    if (*review) {
      print_resolved(err, "review-manifest", {{"in", in_path}, {"out", out_path},
                                              {"fraction", std::to_string(fraction)},
                                              {"seed", std::to_string(seed)}});
      const auto ids = sample_review_manifest(read_records(in_path), fraction, seed);
      write_manifest(ids, out_path);
      err << "[cot3d] " << ids.size() << " ids selected for review\n";
      return 0;
    }

    if (*mock) {
      print_resolved(err, "mock-server", {{"port", std::to_string(port)}});
      MockServer server({}, port);
      out << server.url() << std::endl;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cot3d::cli
