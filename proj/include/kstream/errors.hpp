// Copyright 2026 The kstream Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace kstream {

enum class ErrorKind {
    InvalidArgument,
    Parse,
    Dimension,
    Io,
    Infeasible,
    Capacity,
    SimulationFault,
    Mismatch,
};

/// Base of every exception thrown by the core library. The C API maps
/// `kind()` onto its status codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error(ErrorKind::Parse, line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ErrorKind::Dimension, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class InfeasibleError : public Error {
public:
    explicit InfeasibleError(const std::string& what) : Error(ErrorKind::Infeasible, what) {}
};

class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& what) : Error(ErrorKind::Capacity, what) {}
};

class SimulationFault : public Error {
public:
    explicit SimulationFault(const std::string& what) : Error(ErrorKind::SimulationFault, what) {}
};

} // namespace kstream
