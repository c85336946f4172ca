#pragma once

#include <stdexcept>
#include <string>

namespace visnet {

// Base for all library errors. Subclasses map onto CLI exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape disagreement (e.g. matmul inner dimensions).
class DimensionError : public Error {
public:
    using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// Input record violates its schema (range, enum code, consistency).
class SchemaError : public Error {
public:
    using Error::Error;
};

// Geometry on which the operation is undefined (coincident atoms).
class DegenerateGeometryError : public Error {
public:
    using Error::Error;
};

// File or stream problem; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

// A sample could not be routed to any predictor.
class RoutingError : public Error {
public:
    using Error::Error;
};

// A frozen artifact (teacher checkpoint) was mutated.
class IntegrityError : public Error {
public:
    using Error::Error;
};

}  // namespace visnet
