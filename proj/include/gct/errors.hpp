#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gct {

/// Base class for every error raised by the library. `exit_code()` is the
/// process status the CLI reports for this error category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class ValidationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class AlignmentError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class SingularityError : public Error {
public:
    SingularityError(std::size_t pivot, double value)
        : Error("matrix is numerically singular at pivot " + std::to_string(pivot) +
                " (value " + std::to_string(value) + ")"),
          pivot_(pivot) {}
    std::size_t pivot() const noexcept { return pivot_; }
    int exit_code() const noexcept override { return 2; }

private:
    std::size_t pivot_;
};

class CapacityError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

}  // namespace gct
