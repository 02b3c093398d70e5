#pragma once

#include <stdexcept>
#include <string>

namespace shapeocr {

enum class ErrorKind {
  kInvalidInput,
  kInvalidModel,
  kFormat,
  kIo,
  kConstraintViolation,
  kEmptyGraph,
  kConfig,
};

const char* to_string(ErrorKind kind);

// Every library failure surfaces as this exception; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace shapeocr
