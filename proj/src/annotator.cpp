#include "cot3d/annotator.hpp"

#include "cot3d/errors.hpp"
#include "json.hpp"

namespace cot3d {

using json = nlohmann::ordered_json;

std::string request_to_json(const AnnotatorRequest& req) {
  json j;
  j["shape_id"] = req.shape_id;
  j["family"] = family_name(req.family);
  json parts = json::array();
  for (const auto& p : req.parts) {
    json tags = json::array();
    for (auto a : p.affordances) tags.push_back(affordance_name(a));
    parts.push_back({{"label", p.label}, {"affordances", tags}});
  }
  j["parts"] = parts;
  j["format"] = format_name(req.format);
  return j.dump();
}

AnnotatorRequest request_from_json(const std::string& body) {
  try {
    const json j = json::parse(body);
    AnnotatorRequest req;
    req.shape_id = j.at("shape_id").get<std::string>();
    req.family = parse_family(j.at("family").get<std::string>());
    for (const auto& p : j.at("parts")) {
      Part part{p.at("label").get<std::string>(), {}};
      for (const auto& a : p.at("affordances")) part.affordances.push_back(parse_affordance(a.get<std::string>()));
      req.parts.push_back(std::move(part));
    }
    req.format = parse_format(j.at("format").get<std::string>());
    return req;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed annotator request: ") + e.what());
  }
}

std::string response_to_json(const CoTAnnotation& ann, const std::string& model, double latency_ms) {
  json j;
  j["annotation"] = {{"object_recognition", ann.object_recognition},
                     {"functional_inference", ann.functional_inference},
                     {"causal_reasoning", ann.causal_reasoning},
                     {"conclusion", ann.conclusion}};
  j["model"] = model;
  j["latency_ms"] = latency_ms;
  return j.dump();
}

AnnotatorResponse request_annotation(const RemoteConfig& cfg, const AnnotatorRequest& req) {
  const HttpReply reply = post_json(cfg, "/annotate", request_to_json(req));
  AnnotatorResponse out;
  out.attempts = reply.attempts;
  try {
    const json j = json::parse(reply.body);
    const json& a = j.at("annotation");
    out.annotation.object_recognition = a.at("object_recognition").get<std::string>();
    out.annotation.functional_inference = a.at("functional_inference").get<std::string>();
    out.annotation.causal_reasoning = a.at("causal_reasoning").get<std::string>();
    out.annotation.conclusion = a.at("conclusion").get<std::string>();
    out.model = j.value("model", std::string());
    out.latency_ms = j.contains("latency_ms") ? j.at("latency_ms").get<double>() : reply.latency_ms;
  } catch (const json::exception& e) {
    throw ValidationError("MALFORMED_RESPONSE", e.what());
  }
  const auto violations = validate(out.annotation, req.format);
  if (!violations.empty()) throw ValidationError(violations.front().code, violations.front().message);
  return out;
}

}  // namespace cot3d
