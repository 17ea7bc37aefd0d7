#pragma once

#include <stdexcept>
#include <string>

namespace esc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad argument or violated precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file or record.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Lookup of something that does not exist (session id, strategy name, ...).
class NotFound : public Error {
public:
    using Error::Error;
};

} // namespace esc
