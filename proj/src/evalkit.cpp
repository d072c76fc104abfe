#include "cot3d/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "cot3d/errors.hpp"
#include "cot3d/vocab.hpp"
#include "json.hpp"

namespace cot3d {

using json = nlohmann::ordered_json;

namespace {

// Sorted for binary search.
constexpr std::string_view kStopWords[] = {
    "a",     "about", "also",  "an",    "and",   "are",   "as",    "at",    "be",    "been",
    "being", "but",   "by",    "can",   "could", "did",   "do",    "does",  "for",   "from",
    "had",   "has",   "have",  "he",    "her",   "his",   "i",     "if",    "in",    "into",
    "is",    "it",    "its",   "may",   "might", "must",  "of",    "on",    "or",    "our",
    "she",   "should", "so",   "such",  "than",  "that",  "the",   "their", "them",  "then",
    "there", "these", "they",  "this",  "those", "to",    "too",   "very",  "was",   "we",
    "were",  "what",  "when",  "where", "which", "while", "who",   "will",  "with",  "would",
    "you",   "your"};

using Counts = std::unordered_map<std::string, std::size_t>;

Counts count_words(std::string_view text) {
  Counts c;
  for (auto& w : content_words(text)) ++c[w];
  return c;
}

std::size_t total(const Counts& c) {
  std::size_t n = 0;
  for (const auto& [w, k] : c) n += k;
  return n;
}

std::size_t overlap(const Counts& a, const Counts& b) {
  std::size_t n = 0;
  for (const auto& [w, k] : a) {
    auto it = b.find(w);
    if (it != b.end()) n += std::min(k, it->second);
  }
  return n;
}

double clamp_score(double v) { return std::clamp(v, 1.0, 5.0); }

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

bool is_stop_word(std::string_view word) {
  return std::binary_search(std::begin(kStopWords), std::end(kStopWords), word);
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  for (auto& w : split_words(text)) {
    if (w == kThinkOpen || w == kThinkClose || is_stop_word(w)) continue;
    out.push_back(std::move(w));
  }
  return out;
}

double lexical_f1(std::string_view candidate, std::string_view reference) {
  const Counts c = count_words(candidate), r = count_words(reference);
  const std::size_t nc = total(c), nr = total(r);
  if (nc == 0 && nr == 0) return 1.0;
  if (nc == 0 || nr == 0) return 0.0;
  const double common = static_cast<double>(overlap(c, r));
  if (common == 0.0) return 0.0;
  const double p = common / static_cast<double>(nc);
  const double rec = common / static_cast<double>(nr);
  return 2.0 * p * rec / (p + rec);
}

double content_recall(std::string_view needles, std::string_view haystack) {
  const Counts n = count_words(needles);
  const std::size_t nn = total(n);
  if (nn == 0) return 1.0;
  return static_cast<double>(overlap(n, count_words(haystack))) / static_cast<double>(nn);
}

GeneratedOutput interpret_output(std::string text) {
  GeneratedOutput out;
  out.text = std::move(text);
  try {
    CoTAnnotation a = parse_tagged(out.text);
    out.reasoning = a.object_recognition + " " + a.functional_inference + " " + a.causal_reasoning;
    out.conclusion = a.conclusion;
    out.has_reasoning = true;
    out.parsed = std::move(a);
    return out;
  } catch (const ValidationError&) {
  }
  std::string_view t = out.text;
  while (!t.empty() && (t.back() == '\n' || t.back() == '\r')) t.remove_suffix(1);
  const auto nl = t.rfind('\n');
  if (nl == std::string_view::npos) {
    out.conclusion = std::string(t);
  } else {
    out.reasoning = std::string(t.substr(0, nl));
    out.conclusion = std::string(t.substr(nl + 1));
    out.has_reasoning = !blank(out.reasoning);
  }
  return out;
}

EvalScores score_sample(const GeneratedOutput& out, const CoTAnnotation& gold) {
  EvalScores s;
  if (blank(out.text)) return s;
  if (out.has_reasoning) {
    s.obj = clamp_score(1.0 + 4.0 * content_recall(gold.object_recognition, out.reasoning));
    s.func = clamp_score(1.0 + 4.0 * content_recall(gold.functional_inference, out.reasoning));
    s.inter = clamp_score(1.0 + 4.0 * content_recall(gold.causal_reasoning, out.reasoning));
  }
  s.tru = clamp_score(1.0 + 4.0 * lexical_f1(out.conclusion, gold.conclusion));
  if (blank(out.conclusion)) {
    s.comp = 1.0;
  } else if (out.has_reasoning) {
    s.comp = clamp_score(1.0 + 4.0 * content_recall(out.conclusion, out.reasoning));
  } else {
    s.comp = s.tru;
  }
  return s;
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kObj:
      return "OBJ";
    case Metric::kFunc:
      return "FUNC";
    case Metric::kInter:
      return "INTER";
    case Metric::kTru:
      return "TRU";
    case Metric::kComp:
      return "COMP";
  }
  return "";
}

std::optional<double> metric_value(const EvalScores& s, Metric m) {
  switch (m) {
    case Metric::kObj:
      return s.obj;
    case Metric::kFunc:
      return s.func;
    case Metric::kInter:
      return s.inter;
    case Metric::kTru:
      return s.tru;
    case Metric::kComp:
      return s.comp;
  }
  return std::nullopt;
}

AggregateRow aggregate(const std::vector<EvalScores>& scores, std::string preset,
                       std::string condition) {
  if (scores.empty()) throw DataError("aggregate needs at least one sample");
  AggregateRow row;
  row.preset = std::move(preset);
  row.condition = std::move(condition);
  row.samples = scores.size();
  for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : scores) {
      if (auto v = metric_value(s, kAllMetrics[k])) {
        sum += *v;
        ++n;
      }
    }
    MetricSummary& m = row.metrics[k];
    m.count = n;
    if (n == 0) continue;
    m.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& s : scores) {
      if (auto v = metric_value(s, kAllMetrics[k])) ss += (*v - m.mean) * (*v - m.mean);
    }
    m.stddev = std::sqrt(ss / static_cast<double>(n));
  }
  return row;
}

std::string format_cell(const MetricSummary& m) {
  if (m.count == 0) return "—";
  char buf[64];
  // +0.0 folds a negative zero from rounding into "0.00".
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", m.mean + 0.0, m.stddev + 0.0);
  return buf;
}

std::string markdown_report(const std::vector<AggregateRow>& rows) {
  std::string out = "| Preset | Condition | N |";
  for (Metric m : kAllMetrics) out += " " + std::string(metric_name(m)) + " |";
  out += "\n|---|---|---|";
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& r : rows) {
    out += "| " + r.preset + " | " + r.condition + " | " + std::to_string(r.samples) + " |";
    for (const auto& m : r.metrics) out += " " + format_cell(m) + " |";
    out += "\n";
  }
  out += "\nScores are reported as mean ± standard deviation (population) on a 1–5 scale; "
         "— marks metrics that do not apply.\n";
  return out;
}

std::string rows_to_jsonl(const std::vector<AggregateRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    json j;
    j["preset"] = r.preset;
    j["condition"] = r.condition;
    j["samples"] = r.samples;
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
      std::string key(metric_name(kAllMetrics[k]));
      std::transform(key.begin(), key.end(), key.begin(), ::tolower);
      const auto& m = r.metrics[k];
      if (m.count == 0) {
        j[key] = {{"mean", nullptr}, {"std", nullptr}, {"count", 0}};
      } else {
        j[key] = {{"mean", m.mean}, {"std", m.stddev}, {"count", m.count}};
      }
    }
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<AggregateRow> rows_from_jsonl(std::string_view text) {
  std::vector<AggregateRow> rows;
  std::size_t line_no = 0, pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (blank(line)) continue;
    try {
      const json j = json::parse(line);
      AggregateRow r;
      r.preset = j.at("preset").get<std::string>();
      r.condition = j.at("condition").get<std::string>();
      r.samples = j.at("samples").get<std::size_t>();
      for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
        std::string key(metric_name(kAllMetrics[k]));
        std::transform(key.begin(), key.end(), key.begin(), ::tolower);
        const json& m = j.at(key);
        r.metrics[k].count = m.at("count").get<std::size_t>();
        if (r.metrics[k].count > 0) {
          r.metrics[k].mean = m.at("mean").get<double>();
          r.metrics[k].stddev = m.at("std").get<double>();
        }
      }
      rows.push_back(r);
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad aggregate row: ") + e.what(), line_no);
    }
  }
  return rows;
}

// ---- remote judge ----

std::string judge_request_json(const GeneratedOutput& out, const CoTAnnotation& gold,
                               const std::string& rubric_id) {
  json j;
  j["rubric"] = rubric_id;
  j["output"] = out.text;
  j["gold"] = {{"object_recognition", gold.object_recognition},
               {"functional_inference", gold.functional_inference},
               {"causal_reasoning", gold.causal_reasoning},
               {"conclusion", gold.conclusion}};
  return j.dump();
}

std::string scores_to_json(const EvalScores& s) {
  json j;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["obj"] = opt(s.obj);
  j["func"] = opt(s.func);
  j["inter"] = opt(s.inter);
  j["tru"] = s.tru;
  j["comp"] = s.comp;
  return j.dump();
}

namespace {

double checked_score(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_number()) {
    throw ValidationError("MALFORMED_RESPONSE", std::string("judge field '") + name +
                                                    "' missing or not numeric");
  }
  const double v = it->get<double>();
  if (!std::isfinite(v) || v < 1.0 - 1e-9 || v > 5.0 + 1e-9) {
    throw ValidationError("SCORE_OUT_OF_RANGE",
                          std::string("judge field '") + name + "' = " + it->dump() +
                              " lies outside [1, 5]");
  }
  return std::clamp(v, 1.0, 5.0);
}

std::optional<double> nullable_score(const json& j, const char* name) {
  auto it = j.find(name);
  if (it != j.end() && it->is_null()) return std::nullopt;
  return checked_score(j, name);
}

}  // namespace

EvalScores scores_from_json(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ValidationError("MALFORMED_RESPONSE", e.what());
  }
  if (!j.is_object()) throw ValidationError("MALFORMED_RESPONSE", "judge reply is not an object");
  EvalScores s;
  s.obj = nullable_score(j, "obj");
  s.func = nullable_score(j, "func");
  s.inter = nullable_score(j, "inter");
  s.tru = checked_score(j, "tru");
  s.comp = checked_score(j, "comp");
  return s;
}

EvalScores judge_remote(const RemoteConfig& cfg, const GeneratedOutput& out,
                        const CoTAnnotation& gold, const std::string& rubric_id) {
  return scores_from_json(post_json(cfg, "/judge", judge_request_json(out, gold, rubric_id)).body);
}

std::vector<EvalScores> judge_many(const RemoteConfig& cfg, const std::vector<JudgeItem>& items,
                                   const std::string& rubric_id, std::size_t concurrency) {
  return ordered_parallel_map<EvalScores>(items.size(), concurrency, [&](std::size_t i) {
    return judge_remote(cfg, items[i].output, items[i].gold, rubric_id);
  });
}

}  // namespace cot3d
