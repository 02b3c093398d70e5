#include "shapeocr/error.hpp"

namespace shapeocr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid input";
    case ErrorKind::kInvalidModel: return "invalid model";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIo: return "i/o error";
    case ErrorKind::kConstraintViolation: return "constraint violation";
    case ErrorKind::kEmptyGraph: return "empty graph";
    case ErrorKind::kConfig: return "config error";
  }
  return "unknown error";
}

}  // namespace shapeocr
