#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmtk {

// Root of every error the library throws. The CLI maps ConfigError to exit
// code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed JSONL input. byte_offset is relative to the start of the stream.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::uint64_t byte_offset, std::uint64_t line)
      : InputError(what), byte_offset_(byte_offset), line_(line) {}

  std::uint64_t byte_offset() const { return byte_offset_; }
  std::uint64_t line() const { return line_; }

 private:
  std::uint64_t byte_offset_;
  std::uint64_t line_;
};

class ReferenceError : public Error {
 public:
  using Error::Error;
};

class OutOfCropError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class FilesystemError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmtk
