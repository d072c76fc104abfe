#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace cot3d {

struct RemoteConfig {
  std::string endpoint;  // "http://host:port"
  double timeout_s = 10.0;
  int max_attempts = 3;
  double backoff_s = 0.05;  // first retry delay; doubles on each retry
};

struct HttpReply {
  std::string body;
  int attempts = 0;
  double latency_ms = 0.0;  // of the successful attempt
};

// POSTs a JSON body. Transport failures, 5xx and 429 are retried with
// exponential backoff up to max_attempts; other non-2xx statuses fail at once.
// Throws TransportError when no attempt succeeds and ConfigError for an empty
// endpoint.
HttpReply post_json(const RemoteConfig& cfg, const std::string& path, const std::string& body);

// Runs fn(i) for i in [0, n) on up to `concurrency` threads. Results keep
// input order; the first exception (by index) is rethrown after all finish.
template <typename T>
std::vector<T> ordered_parallel_map(std::size_t n, std::size_t concurrency,
                                    const std::function<T(std::size_t)>& fn) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min(concurrency, n));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          out[i] = fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace cot3d
