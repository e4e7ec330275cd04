#pragma once
//
// errors.hpp — exception hierarchy shared by the whole library.
//
// Four families cover every diagnostic the library raises:
//   ArgumentError    — caller violated a precondition (shape, range, flag combination)
//   SaturationError  — a quantizer input exceeded its dynamic range
//   ConvergenceError — an iterative kernel hit its iteration cap
//   IoError          — malformed/truncated files, unknown formats
//

#include <stdexcept>
#include <string>

namespace lplr {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ArgumentError : public Error {
public:
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Raised when a quantizer input lies outside [-R, R]. Carries the offending
// value (and position, when quantizing a matrix) so retry policies can log it.
class SaturationError : public Error {
public:
    SaturationError(const std::string& msg, double value, std::size_t row = 0, std::size_t col = 0)
        : Error(msg), value(value), row(row), col(col) {}
    double value;
    std::size_t row;
    std::size_t col;
};

class ConvergenceError : public Error {
public:
    explicit ConvergenceError(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace lplr
