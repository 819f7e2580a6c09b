#pragma once

#include <stdexcept>
#include <string>

namespace ppkit {

// Bad arguments, shape mismatches, out-of-contract values. CLI maps this to exit 2.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failures (missing file, short read, write error). CLI exit 1.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed on-disk artifacts: bad magic, unsupported version, truncation,
// checksum mismatch. A subclass of ValidationError so the CLI maps it to exit 2.
class FormatError : public ValidationError {
public:
  explicit FormatError(const std::string& what) : ValidationError(what) {}
};

// Requested (codec, qp group, method) has no registry entry. CLI exit 3.
class ModelNotFoundError : public std::runtime_error {
public:
  explicit ModelNotFoundError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ppkit
