#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace vale {

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Parsed "http://host:port[/prefix]" address.
struct Endpoint {
  std::string host;
  int port = 80;
  std::string prefix;  // path prefix without trailing slash

  /// Throws ConfigError unless `url` is a syntactically valid http URL.
  static Endpoint parse(const std::string& url);
  std::string to_string() const;
};

/// POSTs JSON bodies to a service. Implementations throw TransportError
/// (with attempts() == 1) when no response could be obtained.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body) const = 0;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(Endpoint endpoint, std::chrono::milliseconds timeout);
  HttpResponse post(const std::string& path, const std::string& body) const override;
  const Endpoint& endpoint() const noexcept { return endpoint_; }

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
};

/// Routes requests to in-process handlers; stands in for the model service in
/// tests and the bundled mock fixtures.
class InProcessTransport final : public Transport {
 public:
  using Handler = std::function<HttpResponse(const std::string& body)>;

  void route(const std::string& path, Handler handler) { routes_[path] = std::move(handler); }
  HttpResponse post(const std::string& path, const std::string& body) const override;

 private:
  std::map<std::string, Handler> routes_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds baseDelay{100};  // doubled after every failed attempt
};

/// Sends `body` until a 200 arrives. Connection failures and 5xx responses are
/// retried with exponential backoff; any other status fails immediately.
/// Throws TransportError carrying the attempt count and timestamps.
std::string post_with_retry(const Transport& transport, const std::string& path, const std::string& body,
                            const RetryPolicy& policy);

}  // namespace vale
