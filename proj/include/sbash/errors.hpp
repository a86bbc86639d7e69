#pragma once

#include <stdexcept>
#include <string>

namespace sbash {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Invariant violation in a loaded document; the message names the field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class UnknownUser : public Error {
 public:
  using Error::Error;
};

class UnknownErrorKind : public Error {
 public:
  using Error::Error;
};

class MissingHome : public Error {
 public:
  using Error::Error;
};

class EmptyCorpus : public Error {
 public:
  using Error::Error;
};

class UnreadableFile : public Error {
 public:
  using Error::Error;
};

class ProviderUnavailable : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Failure of a chat-completion call. Carries the raw cause for the
/// threat-intelligence log.
class GenerationError : public Error {
 public:
  enum class Kind { Timeout, BackendUnavailable, MalformedResponse };

  GenerationError(Kind kind, const std::string& cause)
      : Error(cause), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class BindError : public Error {
 public:
  using Error::Error;
};

class SinkUnavailable : public Error {
 public:
  using Error::Error;
};

class ReferenceUnreachable : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbash
