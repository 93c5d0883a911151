#pragma once

#include <stdexcept>
#include <string>

namespace tsaudit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (bad parameters, short series).
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Malformed input content: files, names, report documents.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Checks a precondition and throws PreconditionError with `what` if it fails.
inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace tsaudit
