#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "cot3d/cotformat.hpp"
#include "cot3d/evalkit.hpp"

namespace httplib {
class Server;
}

namespace cot3d {

// Local stand-in for the annotation and judge services.
//   POST /annotate  template annotation for the requested family and parts
//   POST /judge     the deterministic rubric's scores for the posted output
struct MockServerOptions {
  int fail_first = 0;        // answer the first N requests with fail_status
  int fail_status = 503;
  std::function<void(CoTAnnotation&)> tamper_annotation;  // edit before replying
  std::function<void(EvalScores&)> tamper_scores;
  std::string model_id = "mock-annotator-1";
};

class MockServer {
 public:
  // Binds an ephemeral port on 127.0.0.1 unless `port` is given.
  explicit MockServer(MockServerOptions options = {}, int port = 0);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const { return port_; }
  std::string url() const;
  int requests() const { return requests_.load(); }

  // Blocks the calling thread until stop() is called from elsewhere.
  void wait();
  void stop();

 private:
  MockServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<int> requests_{0};
  int port_ = 0;
};

}  // namespace cot3d
