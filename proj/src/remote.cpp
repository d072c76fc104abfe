#include "cot3d/remote.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include "cot3d/errors.hpp"
#include "httplib.h"

namespace cot3d {

HttpReply post_json(const RemoteConfig& cfg, const std::string& path, const std::string& body) {
  if (cfg.endpoint.empty()) throw ConfigError("no remote endpoint configured");
  if (cfg.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");

  httplib::Client client(cfg.endpoint);
  if (!client.is_valid()) throw ConfigError("invalid endpoint '" + cfg.endpoint + "'");
  const auto secs = static_cast<time_t>(cfg.timeout_s);
  const auto usecs = static_cast<time_t>((cfg.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  std::string last_error;
  double delay = cfg.backoff_s;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    auto res = client.Post(path, body, "application/json");
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    if (res) {
      if (res->status >= 200 && res->status < 300) return {res->body, attempt, ms};
      last_error = "HTTP " + std::to_string(res->status);
      const bool retryable = res->status >= 500 || res->status == 429;
      if (!retryable) {
        throw TransportError("POST " + cfg.endpoint + path + " failed: " + last_error);
      }
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < cfg.max_attempts) {
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      delay *= 2.0;
    }
  }
  throw TransportError("POST " + cfg.endpoint + path + " failed after " +
                       std::to_string(cfg.max_attempts) + " attempts: " + last_error);
}

}  // namespace cot3d
