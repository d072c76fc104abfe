#include "cot3d/cotformat.hpp"

#include "cot3d/errors.hpp"
#include "cot3d/vocab.hpp"

namespace cot3d {
namespace {

constexpr std::string_view kStageSep = "\n\n";

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool has_marker(std::string_view s) {
  return s.find(kThinkOpen) != std::string_view::npos ||
         s.find(kThinkClose) != std::string_view::npos;
}

std::size_t count_occurrences(std::string_view s, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string_view::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

std::string_view format_name(AnnotationFormat f) {
  switch (f) {
    case AnnotationFormat::kTagged:
      return "tagged";
    case AnnotationFormat::kUnmarked:
      return "unmarked";
    case AnnotationFormat::kNone:
      return "none";
  }
  return "none";
}

std::optional<AnnotationFormat> try_parse_format(std::string_view name) {
  if (name == "tagged") return AnnotationFormat::kTagged;
  if (name == "unmarked") return AnnotationFormat::kUnmarked;
  if (name == "none" || name == "no_cot") return AnnotationFormat::kNone;
  return std::nullopt;
}

AnnotationFormat parse_format(std::string_view name) {
  if (auto f = try_parse_format(name)) return *f;
  throw DataError("unknown annotation format '" + std::string(name) +
                  "' (expected tagged, unmarked or none)");
}

std::vector<Violation> validate(const CoTAnnotation& ann, AnnotationFormat fmt) {
  std::vector<Violation> out;
  const std::string* stages[] = {&ann.object_recognition, &ann.functional_inference,
                                 &ann.causal_reasoning};
  for (int i = 0; i < 3; ++i) {
    const std::string& s = *stages[i];
    const std::string idx = std::to_string(i + 1);
    if (fmt != AnnotationFormat::kNone && trim(s).empty()) {
      out.push_back({"MISSING_STAGE_" + idx, "stage " + idx + " is empty"});
    }
    if (has_marker(s)) {
      out.push_back({"NESTED_MARKER", "stage " + idx + " contains a reasoning marker"});
    }
    if (s.find(kStageSep) != std::string::npos) {
      out.push_back({"BLANK_LINE_IN_STAGE", "stage " + idx + " contains a blank line"});
    }
  }
  if (trim(ann.conclusion).empty()) {
    out.push_back({"MISSING_CONCLUSION", "conclusion is empty"});
  }
  if (has_marker(ann.conclusion)) {
    out.push_back({"NESTED_MARKER", "conclusion contains a reasoning marker"});
  }
  return out;
}

std::string render(const CoTAnnotation& ann, AnnotationFormat fmt) {
  auto violations = validate(ann, fmt);
  if (!violations.empty()) {
    throw ValidationError(violations.front().code, violations.front().message);
  }
  switch (fmt) {
    case AnnotationFormat::kTagged:
      return std::string(kThinkOpen) + ann.object_recognition + std::string(kStageSep) +
             ann.functional_inference + std::string(kStageSep) + ann.causal_reasoning +
             std::string(kThinkClose) + "\n" + ann.conclusion;
    case AnnotationFormat::kUnmarked:
      return ann.object_recognition + " " + ann.functional_inference + " " +
             ann.causal_reasoning + "\n" + ann.conclusion;
    case AnnotationFormat::kNone:
      return ann.conclusion;
  }
  return ann.conclusion;
}

CoTAnnotation parse_tagged(std::string_view text) {
  const std::size_t opens = count_occurrences(text, kThinkOpen);
  const std::size_t closes = count_occurrences(text, kThinkClose);
  if (opens == 0 && closes == 0) throw ValidationError("MISSING_THINK_BLOCK", "no <think> block");
  if (opens != 1 || closes != 1) {
    throw ValidationError("MULTIPLE_THINK_BLOCKS",
                          "expected exactly one <think>...</think> block, found " +
                              std::to_string(opens) + " opening and " + std::to_string(closes) +
                              " closing markers");
  }
  const auto open = text.find(kThinkOpen);
  const auto close = text.find(kThinkClose);
  if (close < open) throw ValidationError("MISORDERED_MARKERS", "</think> precedes <think>");
  if (!trim(text.substr(0, open)).empty()) {
    throw ValidationError("TEXT_BEFORE_THINK", "text precedes the <think> block");
  }

  std::string_view body = text.substr(open + kThinkOpen.size(), close - open - kThinkOpen.size());
  std::vector<std::string_view> stages;
  std::size_t pos = 0;
  while (true) {
    const auto sep = body.find(kStageSep, pos);
    if (sep == std::string_view::npos) {
      stages.push_back(body.substr(pos));
      break;
    }
    stages.push_back(body.substr(pos, sep - pos));
    pos = sep + kStageSep.size();
    // A run of more than two newlines is one separator.
    while (pos < body.size() && body[pos] == '\n') ++pos;
  }
  if (stages.size() != 3) {
    throw ValidationError("STAGE_COUNT", "expected 3 reasoning stages, found " +
                                             std::to_string(stages.size()));
  }
  CoTAnnotation ann;
  ann.object_recognition = std::string(trim(stages[0]));
  ann.functional_inference = std::string(trim(stages[1]));
  ann.causal_reasoning = std::string(trim(stages[2]));
  ann.conclusion = std::string(trim(text.substr(close + kThinkClose.size())));
  if (ann.conclusion.empty()) {
    throw ValidationError("MISSING_CONCLUSION", "no conclusion after </think>");
  }
  for (int i = 0; i < 3; ++i) {
    const std::string& s = i == 0 ? ann.object_recognition
                                  : (i == 1 ? ann.functional_inference : ann.causal_reasoning);
    if (s.empty()) {
      throw ValidationError("MISSING_STAGE_" + std::to_string(i + 1),
                            "stage " + std::to_string(i + 1) + " is empty");
    }
  }
  return ann;
}

std::string convert(std::string_view text, AnnotationFormat from, AnnotationFormat to) {
  if (from != AnnotationFormat::kTagged) {
    throw ValidationError("UNSUPPORTED_DIRECTION",
                          "cannot convert from " + std::string(format_name(from)) +
                              ": stage boundaries are not recoverable");
  }
  return render(parse_tagged(text), to);
}

}  // namespace cot3d
