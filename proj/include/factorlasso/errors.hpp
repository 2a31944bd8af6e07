#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "factorlasso/types.hpp"

namespace factorlasso {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or out-of-contract arguments.
class InputError : public Error
{
public:
    using Error::Error;
};

/// Configuration problems found while validating a RunConfig.
class ConfigError : public InputError
{
public:
    ConfigError(std::string field, const std::string& message)
        : InputError(field + ": " + message), field_(std::move(field))
    {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Problems with user data (unreadable files, bad CSV).
class DataError : public InputError
{
public:
    using InputError::InputError;
};

class ParseError : public DataError
{
public:
    ParseError(std::size_t row, std::size_t column, const std::string& message)
        : DataError("row " + std::to_string(row) + ", column " + std::to_string(column) + ": " + message),
          row_(row), column_(column)
    {}

    /// 1-based location of the offending cell.
    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

/// The operation needs information the input does not carry (e.g. a population law).
class UnsupportedInputError : public InputError
{
public:
    using InputError::InputError;
};

class NumericalError : public Error
{
public:
    using Error::Error;
};

/// The k-th eigenvalue is too small to define a factor score.
class DegenerateFactorError : public NumericalError
{
public:
    DegenerateFactorError(Index k, double eigenvalue)
        : NumericalError("eigenvalue " + std::to_string(k) + " is numerically zero (" + std::to_string(eigenvalue)
                         + "); reduce the factor count"),
          k_(k), eigenvalue_(eigenvalue)
    {}

    Index k() const noexcept { return k_; }
    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    Index k_;
    double eigenvalue_;
};

/// One or more columns have (numerically) zero empirical second moment.
class DegenerateColumnError : public NumericalError
{
public:
    explicit DegenerateColumnError(std::vector<Index> columns);

    const std::vector<Index>& columns() const noexcept { return columns_; }

private:
    std::vector<Index> columns_;
};

/// Coordinate descent hit its sweep cap. Carries the last iterate.
class NonConvergenceError : public NumericalError
{
public:
    NonConvergenceError(Vector last_iterate, int sweeps, std::optional<std::size_t> grid_index = std::nullopt);

    const Vector& last_iterate() const noexcept { return last_iterate_; }
    int sweeps() const noexcept { return sweeps_; }
    std::optional<std::size_t> grid_index() const noexcept { return grid_index_; }

private:
    Vector last_iterate_;
    int sweeps_;
    std::optional<std::size_t> grid_index_;
};

} // namespace factorlasso
