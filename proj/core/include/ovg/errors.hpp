#pragma once

#include <stdexcept>
#include <string>

namespace ovg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-positive or otherwise unusable image dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A box with zero width or height where a proper box is required.
class DegenerateBoxError : public Error {
public:
    using Error::Error;
};

/// Malformed runtime input (wrong shapes, empty text, fully masked text...).
class InputError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or inconsistent config/checkpoint pairing.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Ground-truth annotation that cannot be scored (e.g. zero-area target).
class AnnotationError : public Error {
public:
    using Error::Error;
};

/// Contrastive loss called without a positive set.
class MatchingError : public Error {
public:
    using Error::Error;
};

/// Unparseable file content.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Schema or invariant violation inside a parsed manifest. The message lists
/// every offending record and field, one per line.
class ValidationError : public Error {
public:
    using Error::Error;
};

}  // namespace ovg
