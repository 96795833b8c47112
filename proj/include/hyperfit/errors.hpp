#pragma once

#include <stdexcept>
#include <string>

namespace hyperfit {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file or inconsistent dataset contents.
class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& msg) : Error("schema error: " + msg) {}
};

/// Invalid geometry (degenerate elements, bad hole radius, ...).
class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& msg) : Error("geometry error: " + msg) {}
};

/// Bad API usage: invalid arguments, incompatible dimensions.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error("usage error: " + msg) {}
};

/// Numerical failure: divergence, factorization breakdown, domain violations.
class NumericsError : public Error {
public:
    explicit NumericsError(const std::string& msg) : Error("numerics error: " + msg) {}
};

/// More than the tolerated fraction of elements had to be rejected.
class DataQualityError : public Error {
public:
    explicit DataQualityError(const std::string& msg) : Error("data quality error: " + msg) {}
};

} // namespace hyperfit
