#include "cot3d/mock_server.hpp"

#include <chrono>

#include "cot3d/annotator.hpp"
#include "cot3d/errors.hpp"
#include "cot3d/shapes.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cot3d {

namespace {

Subset subset_for(const std::string& shape_id) {
  return shape_id.rfind("gapartnet_like", 0) == 0 ? Subset::kGapartnetLike : Subset::kCap3dLike;
}

}  // namespace

MockServer::MockServer(MockServerOptions options, int port)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto gate = [this](httplib::Response& res) {
    const int n = requests_.fetch_add(1);
    if (n < options_.fail_first) {
      res.status = options_.fail_status;
      res.set_content("{\"error\":\"injected failure\"}", "application/json");
      return false;
    }
    return true;
  };

  server_->Post("/annotate", [this, gate](const httplib::Request& req, httplib::Response& res) {
    if (!gate(res)) return;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const AnnotatorRequest r = request_from_json(req.body);
      ShapeSpec spec = default_spec(r.family);
      if (!r.parts.empty()) spec.parts = r.parts;
      CoTAnnotation ann = template_annotation(spec, subset_for(r.shape_id));
      if (options_.tamper_annotation) options_.tamper_annotation(ann);
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      res.set_content(response_to_json(ann, options_.model_id, ms), "application/json");
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  server_->Post("/judge", [this, gate](const httplib::Request& req, httplib::Response& res) {
    if (!gate(res)) return;
    try {
      const auto j = nlohmann::json::parse(req.body);
      const auto& g = j.at("gold");
      CoTAnnotation gold{g.at("object_recognition").get<std::string>(),
                         g.at("functional_inference").get<std::string>(),
                         g.at("causal_reasoning").get<std::string>(),
                         g.at("conclusion").get<std::string>()};
      EvalScores s = score_sample(interpret_output(j.at("output").get<std::string>()), gold);
      if (options_.tamper_scores) options_.tamper_scores(s);
      res.set_content(scores_to_json(s), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
    }
  });

  if (port == 0) {
    port_ = server_->bind_to_any_port("127.0.0.1");
  } else {
    port_ = server_->bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ <= 0) throw TransportError("mock server could not bind a port");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

MockServer::~MockServer() { stop(); }

std::string MockServer::url() const { return "http://127.0.0.1:" + std::to_string(port_); }

void MockServer::wait() {
  while (server_->is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace cot3d
