#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace uot {

enum class ErrorKind {
  InvalidInput,
  NumericFailure,
  Capacity,
  Io,
};

const char* to_string(ErrorKind kind);

/// Exception type thrown by every module of the library.
///
/// `index()` carries the offending source point (or entry) when the failure
/// can be attributed to one, e.g. a non-finite intermediate in a reduction.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what,
        std::optional<std::size_t> index = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> index_;
};

[[noreturn]] void throw_invalid(const std::string& what);
[[noreturn]] void throw_numeric(const std::string& what,
                                std::optional<std::size_t> index = std::nullopt);

}  // namespace uot
