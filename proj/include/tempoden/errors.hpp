#pragma once

#include <stdexcept>
#include <string>

namespace tempoden {

// I/O failures (missing files, short reads, malformed headers).
class io_error : public std::runtime_error {
public:
    explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures (NaN/Inf at an op boundary, diverged training).
class numeric_error : public std::runtime_error {
public:
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace tempoden
