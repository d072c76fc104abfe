#include <cmath>
#include <random>

#include "cot3d/errors.hpp"
#include "cot3d/evalkit.hpp"
#include "cot3d/shapes.hpp"
#include "doctest.h"

using namespace cot3d;

namespace {

CoTAnnotation sample_gold(std::uint64_t seed, Subset subset = Subset::kCap3dLike) {
  Rng rng(seed);
  const Family f = kAllFamilies[seed % 5];
  return template_annotation(sample_spec(f, rng), subset);
}

void check_range(const EvalScores& s) {
  for (Metric m : kAllMetrics) {
    if (auto v = metric_value(s, m)) {
      CHECK(*v >= 1.0);
      CHECK(*v <= 5.0);
    }
  }
}

}  // namespace

TEST_CASE("lexical_f1 hand-counted cases") {
  CHECK(lexical_f1("a mug with a handle", "a mug with a handle") == 1.0);
  CHECK(lexical_f1("red cup", "blue box") == 0.0);
  // precision 2/3, recall 2/3.
  CHECK(lexical_f1("red mug handle", "mug handle lid") == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(lexical_f1("", "") == 1.0);
  CHECK(lexical_f1("the of and", "") == 1.0);
  CHECK(lexical_f1("mug", "") == 0.0);
  CHECK(lexical_f1("", "mug") == 0.0);
  // Multiset: "mug mug" vs "mug": precision 1/2, recall 1 → 2/3.
  CHECK(lexical_f1("mug mug", "mug") == doctest::Approx(2.0 / 3.0));
  // Markers and case do not matter.
  CHECK(lexical_f1("<think>Mug</think> HANDLE", "mug handle") == 1.0);
}

TEST_CASE("content words drop stop words and markers") {
  const auto w = content_words("<think>The handle of the mug</think> is on the right.");
  CHECK(w == std::vector<std::string>{"handle", "mug", "right"});
  CHECK(is_stop_word("the"));
  CHECK_FALSE(is_stop_word("mug"));
}

TEST_CASE("interpret_output segments each rendering") {
  const CoTAnnotation gold = sample_gold(3);
  const auto tagged = interpret_output(render(gold, AnnotationFormat::kTagged));
  CHECK(tagged.has_reasoning);
  REQUIRE(tagged.parsed.has_value());
  CHECK(*tagged.parsed == gold);
  CHECK(tagged.conclusion == gold.conclusion);

  const auto unmarked = interpret_output(render(gold, AnnotationFormat::kUnmarked));
  CHECK(unmarked.has_reasoning);
  CHECK_FALSE(unmarked.parsed.has_value());
  CHECK(unmarked.conclusion == gold.conclusion);
  CHECK(unmarked.reasoning == gold.object_recognition + " " + gold.functional_inference + " " +
                                  gold.causal_reasoning);

  const auto none = interpret_output(render(gold, AnnotationFormat::kNone));
  CHECK_FALSE(none.has_reasoning);
  CHECK(none.conclusion == gold.conclusion);
}

TEST_CASE("gold renderings score 5 on every applicable metric") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (Subset sub : {Subset::kCap3dLike, Subset::kGapartnetLike}) {
      const CoTAnnotation gold = sample_gold(seed, sub);
      for (auto fmt : {AnnotationFormat::kTagged, AnnotationFormat::kUnmarked}) {
        const EvalScores s = score_sample(interpret_output(render(gold, fmt)), gold);
        CHECK(s.obj == 5.0);
        CHECK(s.func == 5.0);
        CHECK(s.inter == 5.0);
        CHECK(s.tru == 5.0);
        CHECK(s.comp == 5.0);
      }
      const EvalScores s = score_sample(interpret_output(gold.conclusion), gold);
      CHECK_FALSE(s.obj.has_value());
      CHECK_FALSE(s.func.has_value());
      CHECK_FALSE(s.inter.has_value());
      CHECK(s.tru == 5.0);
      CHECK(s.comp == 5.0);
    }
  }
}

TEST_CASE("stage recall separates stages") {
  CoTAnnotation gold{"The object is a mug with a handle.", "It holds liquid.",
                     "Because the loop admits fingers, it can be lifted.", "A mug for liquid."};
  GeneratedOutput out = interpret_output("mug handle object\nA mug for liquid.");
  const EvalScores s = score_sample(out, gold);
  CHECK(s.obj == 5.0);
  CHECK(s.inter == 1.0);
  CHECK(s.func == 1.0);
  CHECK(s.tru == 5.0);
  // "mug" found in the reasoning, "liquid" not: 1 + 4 * 1/2.
  CHECK(s.comp == 3.0);
}

TEST_CASE("empty output gets minimum scores") {
  const CoTAnnotation gold = sample_gold(1);
  const EvalScores s = score_sample(interpret_output(""), gold);
  CHECK(s.tru == 1.0);
  CHECK(s.comp == 1.0);
  CHECK_FALSE(s.obj.has_value());
}

TEST_CASE("scores stay in range and appending gold text never lowers a stage score") {
  std::mt19937_64 rng(8);
  const char* words[] = {"mug", "handle", "box", "lid", "the", "door", "liquid", "grasped",
                         "flat", "tall", "side", "cabinet", "knob", "because", "\n"};
  for (int trial = 0; trial < 300; ++trial) {
    const CoTAnnotation gold = sample_gold(trial, trial % 2 ? Subset::kCap3dLike
                                                            : Subset::kGapartnetLike);
    std::string text;
    const int n = static_cast<int>(rng() % 30);
    for (int i = 0; i < n; ++i) text += std::string(words[rng() % std::size(words)]) + " ";
    text += "\nconclusion words mug";
    const GeneratedOutput out = interpret_output(text);
    const EvalScores before = score_sample(out, gold);
    check_range(before);

    const std::string stages[] = {gold.object_recognition, gold.functional_inference,
                                  gold.causal_reasoning};
    const int k = trial % 3;
    GeneratedOutput more = out;
    more.reasoning += " " + stages[k];
    more.has_reasoning = true;
    const EvalScores after = score_sample(more, gold);
    check_range(after);
    const std::optional<double> b[] = {before.obj, before.func, before.inter};
    const std::optional<double> a[] = {after.obj, after.func, after.inter};
    REQUIRE(a[k].has_value());
    CHECK(*a[k] == 5.0);
    if (b[k]) CHECK(*a[k] >= *b[k]);
  }
}

TEST_CASE("aggregate uses population std and the dash convention") {
  EvalScores three{3.0, 3.0, 3.0, 3.0, 3.0};
  const AggregateRow row = aggregate({three, three, three}, "lrm_like", "tagged");
  for (const auto& m : row.metrics) {
    CHECK(format_cell(m) == "3.00 ± 0.00");
    CHECK(m.count == 3);
  }
  // mean 3.26, population std 1.26.
  EvalScores lo{2.00, 1, 1, 1, 1}, hi{4.52, 1, 1, 1, 1};
  CHECK(format_cell(aggregate({lo, hi}, "lrm_like", "unmarked").metrics[0]) == "3.26 ± 1.26");

  EvalScores na;
  na.tru = 4.0;
  na.comp = 2.0;
  const AggregateRow dash = aggregate({na, na}, "llm_like", "none");
  CHECK(format_cell(dash.metrics[0]) == "—");
  CHECK(dash.metrics[0].count == 0);
  CHECK(format_cell(dash.metrics[3]) == "4.00 ± 0.00");

  // Mixed applicability: counts per metric.
  const AggregateRow mixed = aggregate({na, three}, "x", "y");
  CHECK(mixed.metrics[0].count == 1);
  CHECK(mixed.metrics[3].count == 2);
  CHECK(mixed.metrics[3].mean == doctest::Approx(3.5));
  CHECK(mixed.metrics[3].stddev == doctest::Approx(0.5));

  CHECK_THROWS_AS(aggregate({}, "a", "b"), DataError);
}

TEST_CASE("report renderings") {
  EvalScores na;
  na.tru = 4.0;
  na.comp = 4.0;
  const std::vector<AggregateRow> rows{aggregate({{3, 3, 3, 3, 3}}, "lrm_like", "tagged"),
                                       aggregate({na}, "lrm_like", "none")};
  const std::string md = markdown_report(rows);
  CHECK(md.find("| Preset | Condition | N | OBJ | FUNC | INTER | TRU | COMP |") == 0);
  CHECK(md.find("| lrm_like | none | 1 | — | — | — | 4.00 ± 0.00 | 4.00 ± 0.00 |") !=
        std::string::npos);
  CHECK(md.find("mean ± standard deviation") != std::string::npos);
  const auto back = rows_from_jsonl(rows_to_jsonl(rows));
  REQUIRE(back.size() == 2);
  CHECK(markdown_report(back) == md);
}

TEST_CASE("judge reply validation") {
  EvalScores s = scores_from_json(R"({"obj":null,"func":2.5,"inter":5.0000000001,"tru":1,"comp":3})");
  CHECK_FALSE(s.obj.has_value());
  CHECK(s.func == 2.5);
  CHECK(s.inter == 5.0);
  try {
    scores_from_json(R"({"obj":7,"func":2,"inter":2,"tru":2,"comp":2})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "SCORE_OUT_OF_RANGE");
  }
  CHECK_THROWS_AS(scores_from_json(R"({"obj":1,"func":1,"inter":1,"tru":0.5,"comp":2})"),
                  ValidationError);
  CHECK_THROWS_AS(scores_from_json(R"({"obj":1,"func":1,"inter":1,"comp":2})"), ValidationError);
  CHECK_THROWS_AS(scores_from_json("not json"), ValidationError);
  const EvalScores round{std::nullopt, 2.0, 3.0, 4.0, 5.0};
  CHECK(scores_from_json(scores_to_json(round)) == round);
}
