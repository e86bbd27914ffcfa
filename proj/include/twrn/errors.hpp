#pragma once

#include <stdexcept>
#include <string>

namespace twrn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct DecompositionError : Error { using Error::Error; };
struct DegenerateError : Error { using Error::Error; };
struct AllocationError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

struct ConfigError : Error {
  ConfigError(int line, const std::string& msg)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line(line) {}
  int line;
};

}  // namespace twrn
