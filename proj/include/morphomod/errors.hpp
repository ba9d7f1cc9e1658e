#pragma once

#include <stdexcept>
#include <string>

namespace morphomod {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that is well formed but carries no usable data (empty region,
/// all-ones mask with no background, and so on).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

namespace io {

class FileNotFound : public Error {
 public:
  using Error::Error;
};

class MalformedPng : public Error {
 public:
  using Error::Error;
};

class UnsupportedBitDepth : public Error {
 public:
  using Error::Error;
};

class WriteError : public Error {
 public:
  using Error::Error;
};

}  // namespace io

}  // namespace morphomod
