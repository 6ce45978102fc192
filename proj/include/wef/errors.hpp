#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wef {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// User-facing input errors (bad expressions, bad problem files, bad
/// arguments).  The CLI maps these to exit code 1.
class UserError : public Error {
public:
  using Error::Error;
};

/// Numerical failures (integration breakdown, quadrature non-convergence).
/// The CLI maps these to exit code 2.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// Expression syntax error, carries the byte offset of the offending token.
class SyntaxError : public UserError {
public:
  SyntaxError(const std::string& msg, std::size_t offset)
      : UserError(msg + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

/// Unknown identifier in an expression; names the identifier.
class UnknownIdentifierError : public UserError {
public:
  explicit UnknownIdentifierError(const std::string& name, std::size_t offset)
      : UserError("unknown identifier '" + name + "' (at byte offset " +
                  std::to_string(offset) + ")"),
        name_(name), offset_(offset) {}
  const std::string& name() const { return name_; }
  std::size_t offset() const { return offset_; }

private:
  std::string name_;
  std::size_t offset_;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public UserError {
public:
  using UserError::UserError;
};

/// Problem-file schema violation; carries the key path.
class SchemaError : public UserError {
public:
  SchemaError(const std::string& msg, const std::string& key_path)
      : UserError(msg + " (at '" + key_path + "')"), key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

private:
  std::string key_path_;
};

/// ODE integration failure; carries the x location where the step size
/// underflowed.
class IntegrationError : public NumericalError {
public:
  IntegrationError(const std::string& msg, double x)
      : NumericalError(msg + " (near x = " + std::to_string(x) + ")"),
        location_(x) {}
  double location() const { return location_; }

private:
  double location_;
};

/// Quadrature refinement disagreement; carries both levels' values.
class QuadratureError : public NumericalError {
public:
  QuadratureError(const std::string& msg, double coarse, double fine)
      : NumericalError(msg + " (coarse = " + std::to_string(coarse) +
                       ", fine = " + std::to_string(fine) + ")"),
        coarse_(coarse), fine_(fine) {}
  double coarse() const { return coarse_; }
  double fine() const { return fine_; }

private:
  double coarse_;
  double fine_;
};

} // namespace wef
