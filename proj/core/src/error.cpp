#include "uot/error.hpp"

namespace uot {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput:
      return "invalid-input";
    case ErrorKind::NumericFailure:
      return "numeric-failure";
    case ErrorKind::Capacity:
      return "capacity";
    case ErrorKind::Io:
      return "io";
  }
  return "unknown";
}

namespace {

std::string format_message(ErrorKind kind, const std::string& what,
                           std::optional<std::size_t> index) {
  std::string msg = std::string(to_string(kind)) + ": " + what;
  if (index) msg += " (index " + std::to_string(*index) + ")";
  return msg;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& what, std::optional<std::size_t> index)
    : std::runtime_error(format_message(kind, what, index)), kind_(kind), index_(index) {}

void throw_invalid(const std::string& what) { throw Error(ErrorKind::InvalidInput, what); }

void throw_numeric(const std::string& what, std::optional<std::size_t> index) {
  throw Error(ErrorKind::NumericFailure, what, index);
}

}  // namespace uot
