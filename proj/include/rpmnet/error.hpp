#pragma once

#include <stdexcept>
#include <string>

namespace rpmnet {

// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the op. The message names the op.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A caller broke a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

// An op produced NaN or Inf.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

// Input data problems: missing columns, empty files, unassigned classes.
class DataError : public Error {
public:
    using Error::Error;
};

// Bundle checksum mismatch or truncation.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Bundle written by an incompatible format version.
class VersionError : public Error {
public:
    using Error::Error;
};

}  // namespace rpmnet
