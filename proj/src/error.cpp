#include "vale/error.hpp"

namespace vale {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::config: return "config";
    case ErrorKind::capacity: return "capacity";
    case ErrorKind::conflict: return "conflict";
    case ErrorKind::transport: return "transport";
    case ErrorKind::protocol: return "protocol";
  }
  return "unknown";
}

}  // namespace vale
