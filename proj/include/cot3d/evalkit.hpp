#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cot3d/alignment.hpp"
#include "cot3d/cotformat.hpp"
#include "cot3d/dataset.hpp"
#include "cot3d/remote.hpp"

namespace cot3d {

// Fixed English stop-word list used by the lexical rubric.
bool is_stop_word(std::string_view word);

// split_words() minus stop words and the reasoning markers.
std::vector<std::string> content_words(std::string_view text);

// Multiset-overlap F1 over content words. Both empty → 1, one empty → 0.
double lexical_f1(std::string_view candidate, std::string_view reference);

// Fraction of `needles` (multiset, clipped counts) found in `haystack`.
// An empty needle list gives 1.
double content_recall(std::string_view needles, std::string_view haystack);

struct GeneratedOutput {
  std::string text;
  std::string reasoning;  // stages joined by a space; empty without reasoning
  std::string conclusion;
  bool has_reasoning = false;
  std::optional<CoTAnnotation> parsed;  // set only when text parses as tagged
};

// Tagged text is parsed; otherwise the last line is the conclusion and
// everything before it is reasoning.
GeneratedOutput interpret_output(std::string text);

struct EvalScores {
  std::optional<double> obj, func, inter;  // nullopt = not applicable
  double tru = 1.0;
  double comp = 1.0;

  friend bool operator==(const EvalScores&, const EvalScores&) = default;
};

// OBJ/FUNC/INTER = 1 + 4·content_recall(gold stage, reasoning).
// TRU = 1 + 4·lexical_f1(conclusion, gold conclusion).
// COMP = 1 + 4·content_recall(conclusion, reasoning), or the TRU value when
// there is no reasoning. Empty text scores TRU = COMP = 1.
EvalScores score_sample(const GeneratedOutput& out, const CoTAnnotation& gold);

enum class Metric { kObj, kFunc, kInter, kTru, kComp };
inline constexpr std::array<Metric, 5> kAllMetrics{Metric::kObj, Metric::kFunc, Metric::kInter,
                                                   Metric::kTru, Metric::kComp};
std::string_view metric_name(Metric m);  // "OBJ", ...
std::optional<double> metric_value(const EvalScores& s, Metric m);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t count = 0;  // 0 = every sample was not applicable
};

struct AggregateRow {
  std::string preset;
  std::string condition;
  std::size_t samples = 0;
  std::array<MetricSummary, 5> metrics;
};

// Throws DataError for an empty list.
AggregateRow aggregate(const std::vector<EvalScores>& scores, std::string preset,
                       std::string condition);

// "m.mm ± s.ss", or "—" when the metric was never applicable.
std::string format_cell(const MetricSummary& m);

std::string markdown_report(const std::vector<AggregateRow>& rows);
std::string rows_to_jsonl(const std::vector<AggregateRow>& rows);
std::vector<AggregateRow> rows_from_jsonl(std::string_view text);

// Wire helpers for POST /judge.
std::string judge_request_json(const GeneratedOutput& out, const CoTAnnotation& gold,
                               const std::string& rubric_id);
std::string scores_to_json(const EvalScores& s);

// Fields obj/func/inter may be null. Values within 1e-9 of [1, 5] are
// clamped; anything else outside the range, missing, or non-numeric throws
// ValidationError (SCORE_OUT_OF_RANGE / MALFORMED_RESPONSE).
EvalScores scores_from_json(const std::string& body);

EvalScores judge_remote(const RemoteConfig& cfg, const GeneratedOutput& out,
                        const CoTAnnotation& gold, const std::string& rubric_id);

struct JudgeItem {
  GeneratedOutput output;
  CoTAnnotation gold;
};

// Results in input order; at most `concurrency` requests in flight.
std::vector<EvalScores> judge_many(const RemoteConfig& cfg, const std::vector<JudgeItem>& items,
                                   const std::string& rubric_id, std::size_t concurrency);

struct Model;

// Embeds every pool text once (B×d').
Tensor embed_pool(const Model& model, const std::vector<std::string>& pool);

// Returns the pool text whose embedding has the largest dot product with the
// shape's (ties to the lowest index). Throws DataError for an empty pool.
GeneratedOutput retrieve_as_generation(const Model& model, const PointCloud& shape,
                                       const std::vector<std::string>& pool);
GeneratedOutput retrieve_as_generation(const Model& model, const PointCloud& shape,
                                       const std::vector<std::string>& pool, const Tensor& pool_z);

struct EvalRun {
  std::vector<std::string> shape_ids;
  std::vector<GeneratedOutput> outputs;
  std::vector<EvalScores> scores;
  AggregateRow row;
  RetrievalMetrics retrieval;
};

// Pool = every test record's gold rendered in `condition`; each test shape
// retrieves from it and is scored against its own gold.
EvalRun evaluate_model(const Model& model, const std::vector<DatasetRecord>& test,
                       AnnotationFormat condition, const std::string& preset_label);

}  // namespace cot3d
