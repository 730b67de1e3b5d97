// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace scenechat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A file or message could not be parsed. `where()` carries the line or field.
class ParseError : public Error {
 public:
  ParseError(std::string where, const std::string& message)
      : Error(where.empty() ? message : where + ": " + message), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

/// A well-formed value violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

/// A sequence does not fit into the language model's context window.
class ContextOverflow : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// An external service rejected our credentials.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// A session is already processing a message.
class BusyError : public Error {
 public:
  using Error::Error;
};

}  // namespace scenechat
