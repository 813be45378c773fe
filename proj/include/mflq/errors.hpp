#pragma once

#include <stdexcept>
#include <string>

namespace mflq {

// Base class for every library error. CLI maps these onto exit codes:
// input/validation problems -> 2, numerical failures -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A matrix or vector does not have the declared dimensions.
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

// NaN or infinity found where a finite value is required.
class NonFinite : public Error {
public:
    using Error::Error;
};

// One of the positive-(semi)definiteness conditions on the cost weights
// failed. Carries the condition name and the offending smallest eigenvalue.
class AssumptionViolated : public Error {
public:
    AssumptionViolated(std::string condition, double eigenvalue)
        : Error(condition + " (smallest eigenvalue " + std::to_string(eigenvalue) + ")"),
          condition_(std::move(condition)),
          eigenvalue_(eigenvalue) {}

    const std::string& condition() const { return condition_; }
    double eigenvalue() const { return eigenvalue_; }

private:
    std::string condition_;
    double eigenvalue_;
};

// Symmetric factorization failed: the matrix is not positive definite.
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

// Two time meshes that must be nested (or equal) are not.
class MeshMismatch : public Error {
public:
    using Error::Error;
};

class IndexOutOfRange : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an evaluator.
class DomainError : public Error {
public:
    using Error::Error;
};

// Rate estimation asked of data it cannot support (zero errors, too few points).
class DegenerateData : public Error {
public:
    using Error::Error;
};

// An integration blew up (entry magnitude beyond 1e12).
class StepUnstable : public Error {
public:
    using Error::Error;
};

// Problem file could not be parsed; carries the offending key when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& message, std::string key = {})
        : Error(message), key_(std::move(key)) {}

    const std::string& key() const { return key_; }

private:
    std::string key_;
};

} // namespace mflq
