#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <vector>

namespace vale {

enum class ErrorKind { input, config, capacity, conflict, transport, protocol };

const char* to_string(ErrorKind kind);

/// Base class for every error the library raises. Callers that only need to
/// report can catch this and use kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad caller-supplied data: dimensions, empty labels, out-of-range values.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// The requested computation exceeds a hard size limit (e.g. exact Shapley on
/// too many players).
class CapacityError : public Error {
 public:
  explicit CapacityError(const std::string& what) : Error(ErrorKind::capacity, what) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& what) : Error(ErrorKind::conflict, what) {}
};

/// A remote service could not be reached, or answered with a non-200 status.
class TransportError : public Error {
 public:
  using Clock = std::chrono::system_clock;

  TransportError(const std::string& what, int attempts, std::vector<Clock::time_point> attemptTimes = {},
                 int lastStatus = 0)
      : Error(ErrorKind::transport, what),
        attempts_(attempts),
        attemptTimes_(std::move(attemptTimes)),
        lastStatus_(lastStatus) {}

  int attempts() const noexcept { return attempts_; }
  const std::vector<Clock::time_point>& attempt_times() const noexcept { return attemptTimes_; }
  /// HTTP status of the last attempt, 0 when no response arrived at all.
  int last_status() const noexcept { return lastStatus_; }

 private:
  int attempts_;
  std::vector<Clock::time_point> attemptTimes_;
  int lastStatus_;
};

/// The service answered, but the body violates the wire contract.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what) : Error(ErrorKind::protocol, what) {}
};

}  // namespace vale
