#include <thread>

#include "cot3d/annotator.hpp"
#include "cot3d/errors.hpp"
#include "cot3d/evalkit.hpp"
#include "cot3d/mock_server.hpp"
#include "doctest.h"

using namespace cot3d;

namespace {

RemoteConfig config_for(const MockServer& s) {
  RemoteConfig cfg;
  cfg.endpoint = s.url();
  cfg.timeout_s = 5.0;
  cfg.backoff_s = 0.001;
  return cfg;
}

AnnotatorRequest box_request() {
  return {"cap3d_like-box-00001", Family::kBox, default_parts(Family::kBox),
          AnnotationFormat::kTagged};
}

}  // namespace

TEST_CASE("request JSON round trip") {
  AnnotatorRequest req{"gapartnet_like-pot-00003", Family::kPot, default_parts(Family::kPot),
                       AnnotationFormat::kUnmarked};
  const AnnotatorRequest back = request_from_json(request_to_json(req));
  CHECK(back.shape_id == req.shape_id);
  CHECK(back.family == req.family);
  CHECK(back.parts == req.parts);
  CHECK(back.format == req.format);
  CHECK_THROWS_AS(request_from_json("{}"), DataError);
}

TEST_CASE("mock annotator returns a valid template annotation") {
  MockServer server;
  const AnnotatorResponse r = request_annotation(config_for(server), box_request());
  CHECK(validate(r.annotation, AnnotationFormat::kTagged).empty());
  CHECK(r.annotation.object_recognition.find("box") != std::string::npos);
  CHECK(r.attempts == 1);
  CHECK(r.model == "mock-annotator-1");
}

TEST_CASE("two injected failures then success takes three attempts") {
  MockServerOptions opt;
  opt.fail_first = 2;
  MockServer server(opt);
  const AnnotatorResponse r = request_annotation(config_for(server), box_request());
  CHECK(r.attempts == 3);
  CHECK(server.requests() == 3);
}

TEST_CASE("three failures exhaust the retry budget") {
  MockServerOptions opt;
  opt.fail_first = 3;
  MockServer server(opt);
  CHECK_THROWS_AS(request_annotation(config_for(server), box_request()), TransportError);
  CHECK(server.requests() == 3);
}

TEST_CASE("client errors are not retried") {
  MockServerOptions opt;
  opt.fail_first = 1;
  opt.fail_status = 400;
  MockServer server(opt);
  CHECK_THROWS_AS(request_annotation(config_for(server), box_request()), TransportError);
  CHECK(server.requests() == 1);
}

TEST_CASE("invalid annotation in the reply is a validation error, not retried") {
  MockServerOptions opt;
  opt.tamper_annotation = [](CoTAnnotation& a) { a.functional_inference.clear(); };
  MockServer server(opt);
  try {
    request_annotation(config_for(server), box_request());
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "MISSING_STAGE_2");
  }
  CHECK(server.requests() == 1);
}

TEST_CASE("unreachable endpoint is a transport error") {
  int port = 0;
  {
    MockServer s;
    port = s.port();
  }
  RemoteConfig cfg;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
  cfg.timeout_s = 0.5;
  cfg.backoff_s = 0.001;
  CHECK_THROWS_AS(request_annotation(cfg, box_request()), TransportError);
  RemoteConfig empty;
  CHECK_THROWS_AS(request_annotation(empty, box_request()), ConfigError);
}

TEST_CASE("mock judge echoes the rubric") {
  MockServer server;
  const auto gold = template_annotation(default_spec(Family::kMug), Subset::kCap3dLike);
  std::vector<JudgeItem> items;
  for (auto fmt : {AnnotationFormat::kTagged, AnnotationFormat::kUnmarked, AnnotationFormat::kNone}) {
    items.push_back({interpret_output(render(gold, fmt)), gold});
  }
  items.push_back({interpret_output("A cabinet.\nsomething else"), gold});
  const auto remote = judge_many(config_for(server), items, "lexical-v1", 3);
  REQUIRE(remote.size() == items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    CHECK(remote[i] == score_sample(items[i].output, items[i].gold));
  }
  CHECK_FALSE(remote[2].obj.has_value());
}

TEST_CASE("out-of-range judge scores are rejected") {
  MockServerOptions opt;
  opt.tamper_scores = [](EvalScores& s) { s.tru = 7.0; };
  MockServer server(opt);
  const auto gold = template_annotation(default_spec(Family::kBox), Subset::kCap3dLike);
  try {
    judge_remote(config_for(server), interpret_output(gold.conclusion), gold, "lexical-v1");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.code() == "SCORE_OUT_OF_RANGE");
  }
}

TEST_CASE("judge retries after injected failures") {
  MockServerOptions opt;
  opt.fail_first = 2;
  MockServer server(opt);
  const auto gold = template_annotation(default_spec(Family::kBox), Subset::kCap3dLike);
  const EvalScores s =
      judge_remote(config_for(server), interpret_output(render(gold, AnnotationFormat::kTagged)),
                   gold, "lexical-v1");
  CHECK(s.tru == 5.0);
  CHECK(server.requests() == 3);
}
