#pragma once

#include <stdexcept>
#include <string>

namespace advrat {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSONL line, resource file line, config document).
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A record or resource violates a type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A configuration value is missing, unknown, or inconsistent with the data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced non-finite values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace advrat
