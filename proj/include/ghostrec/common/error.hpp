#pragma once

#include <stdexcept>
#include <string>

namespace ghostrec {

// Base of every error the library throws. The CLI maps the two families
// below onto exit codes: DomainError -> 1, FormatError/UsageError -> 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Domain and contract failures: the inputs are well formed but the
// requested operation is not defined for them.
class DomainError : public Error {
public:
    using Error::Error;
};

class DimensionError : public DomainError {
public:
    using DomainError::DomainError;
};

class DegenerateError : public DomainError {
public:
    using DomainError::DomainError;
};

class LabelError : public DomainError {
public:
    using DomainError::DomainError;
};

class TapeError : public DomainError {
public:
    using DomainError::DomainError;
};

class NumericError : public DomainError {
public:
    using DomainError::DomainError;
};

// Speckle fingerprint mismatch between a dataset and a checkpoint.
class ContractError : public DomainError {
public:
    using DomainError::DomainError;
};

// Malformed, truncated or incompatible files.
class FormatError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

class ValidationError : public FormatError {
public:
    using FormatError::FormatError;
};

// Bad arguments, bad config values, missing files.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace ghostrec
