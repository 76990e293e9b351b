#pragma once

#include <stdexcept>
#include <string>

namespace hse {

// Every error raised by the library derives from Error so that callers (CLI,
// service) can map the concrete type onto an exit code or HTTP status.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file.
class ParseError : public Error {
public:
    ParseError(const std::string& msg, std::size_t row)
        : Error(msg + " (row " + std::to_string(row) + ")"), row_(row) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

// Well-formed input that violates a domain invariant (label out of range, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Parameter combination that cannot work (k >= N, unknown kind, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// Point already labeled.
class ConflictError : public Error {
public:
    using Error::Error;
};

// A label was submitted for a point that is not the issued query.
class OutOfOrderError : public Error {
public:
    using Error::Error;
};

// API misuse (empty candidate list, empty curve, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

class PoolExhausted : public Error {
public:
    using Error::Error;
};

class SessionComplete : public Error {
public:
    using Error::Error;
};

}  // namespace hse
