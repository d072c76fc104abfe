#pragma once

#include <string>
#include <vector>

#include "cot3d/cotformat.hpp"
#include "cot3d/remote.hpp"
#include "cot3d/shapes.hpp"

namespace cot3d {

// Shape information travels as structured metadata (family, parts and their
// affordance tags), not as renders.
struct AnnotatorRequest {
  std::string shape_id;
  Family family = Family::kBox;
  std::vector<Part> parts;
  AnnotationFormat format = AnnotationFormat::kTagged;
};

struct AnnotatorResponse {
  CoTAnnotation annotation;
  std::string model;
  double latency_ms = 0.0;
  int attempts = 0;
};

std::string request_to_json(const AnnotatorRequest& req);
AnnotatorRequest request_from_json(const std::string& body);  // throws DataError
std::string response_to_json(const CoTAnnotation& ann, const std::string& model, double latency_ms);

// POST /annotate. Transport failures are retried (see post_json); a response
// whose annotation fails validate() for the requested format throws
// ValidationError with the first violation's code and is not retried.
// A body that is not the expected JSON throws ValidationError
// MALFORMED_RESPONSE.
AnnotatorResponse request_annotation(const RemoteConfig& cfg, const AnnotatorRequest& req);

}  // namespace cot3d
