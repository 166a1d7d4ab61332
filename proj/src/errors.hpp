#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gossipsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invariant-violating envelope data; carries the first
// offending field.
class EnvelopeError : public Error {
 public:
  EnvelopeError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A node with no known peers cannot initiate gossip.
class EmptyViewError : public Error {
 public:
  using Error::Error;
};

}  // namespace gossipsim
