#pragma once

#include <stdexcept>
#include <string>

namespace mbsat {

/// Base of every error raised by the simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (unknown key, bad value, K > N_U, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Layout or position outside what GEO geometry supports.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. The message names the source and line.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Gain-table lookup outside the tabulated grid.
class InterpolationError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mbsat
