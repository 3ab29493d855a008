#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "ksprune/errors.hpp"

namespace ksprune::http {

/// Non-2xx answer that retrying will not fix (4xx other than 408/429).
class StatusError : public Error {
 public:
  StatusError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POSTs JSON to base_url + path and parses the JSON reply. Connection
/// failures, timeouts, 408/429 and 5xx throw TransportError; other non-2xx
/// throw StatusError; an unparsable body throws TransportError.
nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const Headers& headers, double timeout_seconds);

/// Runs fn up to `attempts` times, sleeping base_delay * 2^k between tries.
/// Only TransportError is retried.
template <typename Fn>
auto with_retries(int attempts, std::chrono::milliseconds base_delay, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const TransportError& e) {
      if (attempt >= attempts) throw;
      const auto delay = base_delay * (1 << (attempt - 1));
      spdlog::warn("attempt {}/{} failed: {}; retrying in {} ms", attempt, attempts, e.what(), delay.count());
      std::this_thread::sleep_for(delay);
    }
  }
}

}  // namespace ksprune::http
