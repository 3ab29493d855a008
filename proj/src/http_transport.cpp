#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "http_transport.hpp"

namespace ksprune::http {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("URL needs a scheme (http:// or https://): " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.prefix = url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

}  // namespace

nlohmann::json post_json(const std::string& base_url, const std::string& path, const nlohmann::json& body,
                         const Headers& headers, double timeout_seconds) {
  const SplitUrl url = split_url(base_url);
  httplib::Client client(url.origin);
  const auto secs = static_cast<time_t>(timeout_seconds);
  const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);

  const std::string target = url.prefix + path;
  auto res = client.Post(target, hdrs, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status < 200 || status >= 300) {
    std::string snippet = res->body.substr(0, 200);
    const std::string msg = "POST " + base_url + path + " returned HTTP " + std::to_string(status) + ": " + snippet;
    if (status == 408 || status == 429 || status >= 500) throw TransportError(msg);
    throw StatusError(status, msg);
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError("POST " + base_url + path + ": response is not JSON: " + e.what());
  }
}

}  // namespace ksprune::http
