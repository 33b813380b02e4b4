#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stifflab {

/// Base of every error raised by the library.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A query or construction outside the domain of a measure or box.
class DomainError : public Error
{
  public:
    using Error::Error;
};

/// A model parameter outside its admissible range.
class ParameterError : public Error
{
  public:
    using Error::Error;
};

/// A malformed argument: non-monotone nodes, negative weights, bad rates.
class ArgumentError : public Error
{
  public:
    using Error::Error;
};

/// Operation applied to a grid of the wrong origin mode.
class ShapeError : public Error
{
  public:
    using Error::Error;
};

/// Assembly failure attached to a specific cell.
class AssemblyError : public Error
{
  public:
    AssemblyError(const std::string& what, std::size_t cell)
        : Error(what + " (cell " + std::to_string(cell) + ")"), cell_(cell)
    {
    }
    std::size_t cell() const noexcept { return cell_; }

  private:
    std::size_t cell_;
};

/// Solver breakdown, singular blocks, or non-finite values.
class NumericalError : public Error
{
  public:
    using Error::Error;
};

/// A structural invariant that the mathematics guarantees was violated.
class InvariantViolation : public Error
{
  public:
    using Error::Error;
};

/// Requested work exceeds the configured budget.
class ResourceError : public Error
{
  public:
    using Error::Error;
};

/// Configuration validation failure naming the offending key.
class ValidationError : public Error
{
  public:
    ValidationError(const std::string& key, const std::string& what)
        : Error(key + ": " + what), key_(key)
    {
    }
    const std::string& key() const noexcept { return key_; }

  private:
    std::string key_;
};

} // namespace stifflab
