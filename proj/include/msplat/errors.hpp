// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace msplat {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed text input. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& message, int line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Parameter vector does not match the scene it is applied to.
class TopologyError : public Error {
public:
    using Error::Error;
};

/// Image dimensions do not agree or are too small for an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite value encountered during optimization.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace msplat
