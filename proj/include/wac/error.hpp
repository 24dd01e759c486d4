#pragma once

#include <stdexcept>
#include <string>

namespace wac {

// Base of every error raised by the library. Callers that only care about
// "something went wrong" catch this; the subclasses let tests and the CLI
// distinguish failure classes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Malformed file content. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ReferentialIntegrityError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  DimensionMismatchError(std::size_t expected, std::size_t got, const std::string& where)
      : Error(where + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class GenerationFailureError : public Error {
 public:
  using Error::Error;
};

// A word without a classifier. Kept distinct from numeric failures so callers
// can skip the word.
class OovError : public Error {
 public:
  explicit OovError(const std::string& word)
      : Error("out-of-vocabulary word: '" + word + "'"), word_(word) {}
  const std::string& word() const { return word_; }

 private:
  std::string word_;
};

class BackendMismatchError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wac
