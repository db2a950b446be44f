#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace modeltalk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset, model, bank, lexicon or template files.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Caller supplied an argument outside an operation's domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Parse-language errors carry the zero-based token index they refer to.
class GrammarError : public Error {
 public:
  GrammarError(const std::string& message, std::size_t position)
      : Error(message + " at token " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace modeltalk
