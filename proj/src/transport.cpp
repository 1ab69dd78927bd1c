#include "vale/transport.hpp"

#include <httplib.h>

#include <regex>
#include <thread>

#include "vale/error.hpp"

namespace vale {

Endpoint Endpoint::parse(const std::string& url) {
  static const std::regex pattern(R"(^http://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\])(?::([0-9]{1,5}))?(/[^\s?#]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) throw ConfigError("invalid endpoint address '" + url + "'");
  Endpoint ep;
  ep.host = m[1].str();
  if (m[2].matched) {
    ep.port = std::stoi(m[2].str());
    if (ep.port < 1 || ep.port > 65535) throw ConfigError("endpoint port out of range in '" + url + "'");
  }
  ep.prefix = m[3].matched ? m[3].str() : "";
  while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
  return ep;
}

std::string Endpoint::to_string() const { return "http://" + host + ":" + std::to_string(port) + prefix; }

HttpTransport::HttpTransport(Endpoint endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {}

HttpResponse HttpTransport::post(const std::string& path, const std::string& body) const {
  httplib::Client client(endpoint_.host, endpoint_.port);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  auto res = client.Post((endpoint_.prefix + path).c_str(), body, "application/json");
  if (!res) throw TransportError("POST " + endpoint_.to_string() + path + " failed: " + httplib::to_string(res.error()), 1);
  return {res->status, res->body};
}

HttpResponse InProcessTransport::post(const std::string& path, const std::string& body) const {
  auto it = routes_.find(path);
  if (it == routes_.end()) return {404, R"({"error":"no route"})"};
  return it->second(body);
}

std::string post_with_retry(const Transport& transport, const std::string& path, const std::string& body,
                            const RetryPolicy& policy) {
  const int attempts = std::max(1, policy.attempts);
  std::vector<TransportError::Clock::time_point> times;
  auto delay = policy.baseDelay;
  std::string lastCause;
  int lastStatus = 0;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    times.push_back(TransportError::Clock::now());
    try {
      HttpResponse res = transport.post(path, body);
      if (res.status == 200) return std::move(res.body);
      lastStatus = res.status;
      lastCause = "HTTP " + std::to_string(res.status);
      if (res.status < 500)
        throw TransportError(path + ": " + lastCause + " after " + std::to_string(attempt) + " attempt(s)", attempt,
                             times, lastStatus);
    } catch (const TransportError& e) {
      if (e.last_status() != 0 && e.last_status() < 500) throw;
      lastCause = e.what();
      lastStatus = e.last_status();
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(delay);
      delay *= 2;
    }
  }
  throw TransportError(path + ": " + lastCause + " after " + std::to_string(attempts) + " attempt(s)", attempts, times,
                       lastStatus);
}

}  // namespace vale
