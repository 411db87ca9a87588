#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvarlab {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed token in an input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed tokens that violate the file layout (e.g. non-uniform time grid).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Too few samples / increments for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Parameter outside its admissible domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvarlab
