#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stl2vec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed formula text. Carries a 1-based line/column position.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line, std::size_t column)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Shapes or dimensions of inputs disagree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A formula needs more trajectory than was supplied.
class HorizonError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf produced during evaluation or training.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Any other violated precondition (empty argument lists, bad config values, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

}  // namespace stl2vec
