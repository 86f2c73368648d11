#ifndef OTE_ERROR_HPP
#define OTE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ote {

// Error categories used across the toolkit. All inherit from Error so
// callers can catch broadly; the CLI maps them to exit code 2.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shapes do not line up for the requested operation.
class ShapeError : public Error {
public:
  using Error::Error;
};

// An index (vocabulary id, class id, ...) is out of range.
class IndexError : public Error {
public:
  using Error::Error;
};

// An API precondition was violated (empty sequence, non-scalar loss, ...).
class ContractError : public Error {
public:
  using Error::Error;
};

// Input data fails a documented validity rule.
class ValidationError : public Error {
public:
  using Error::Error;
};

// A structured file does not match its expected format.
class FormatError : public Error {
public:
  using Error::Error;
};

// XML or other structured-text parsing failed.
class ParseError : public Error {
public:
  using Error::Error;
};

// The requested feature is not supported by the given model variant.
class CapabilityError : public Error {
public:
  using Error::Error;
};

// A lookup key (word, parameter name) is unknown.
class LookupError : public Error {
public:
  using Error::Error;
};

// A numeric check detected non-finite values or similar trouble.
class DiagnosticError : public Error {
public:
  using Error::Error;
};

}  // namespace ote

#endif  // OTE_ERROR_HPP
