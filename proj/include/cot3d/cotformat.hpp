#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cot3d {

struct CoTAnnotation {
  std::string object_recognition;
  std::string functional_inference;
  std::string causal_reasoning;
  std::string conclusion;

  friend bool operator==(const CoTAnnotation&, const CoTAnnotation&) = default;
};

enum class AnnotationFormat { kTagged, kUnmarked, kNone };

std::string_view format_name(AnnotationFormat f);  // "tagged" | "unmarked" | "none"
AnnotationFormat parse_format(std::string_view name);  // throws DataError
std::optional<AnnotationFormat> try_parse_format(std::string_view name);

// tagged:   <think>s1\n\ns2\n\ns3</think>\nconclusion
// unmarked: s1 s2 s3\nconclusion
// none:     conclusion
// Throws ValidationError (first violation's code) when the annotation is not
// valid for the format.
std::string render(const CoTAnnotation& ann, AnnotationFormat fmt);

// Inverse of render(·, kTagged). Violations throw ValidationError with codes
// MISSING_THINK_BLOCK, MULTIPLE_THINK_BLOCKS, STAGE_COUNT, MISSING_CONCLUSION.
CoTAnnotation parse_tagged(std::string_view text);

// Only tagged input can be converted; stage boundaries of the other
// renderings are not recoverable.
std::string convert(std::string_view text, AnnotationFormat from, AnnotationFormat to);

struct Violation {
  std::string code;
  std::string message;
};

// Structural checks only. Codes: MISSING_STAGE_1..3, MISSING_CONCLUSION,
// NESTED_MARKER, BLANK_LINE_IN_STAGE.
std::vector<Violation> validate(const CoTAnnotation& ann, AnnotationFormat fmt);

}  // namespace cot3d
