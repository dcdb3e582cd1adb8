#pragma once

#include <stdexcept>
#include <string>

namespace npcluster {

// Every failure the library reports derives from Error. The CLI maps each
// subclass to its own process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file contents (bad header, truncation, non-finite values).
class FormatError : public IoError {
public:
    using IoError::IoError;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace npcluster
