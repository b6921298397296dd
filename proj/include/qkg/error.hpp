#pragma once

#include <stdexcept>
#include <string>

namespace qkg {

// Base error for all qkg failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when no structured payload can be located in a raw model response.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& what) : Error(what) {}
};

// Raised when a located payload violates its schema.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(what) {}
};

}  // namespace qkg
