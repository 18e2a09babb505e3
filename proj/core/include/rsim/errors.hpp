#pragma once

#include <stdexcept>
#include <string>

namespace rsim {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor geometry disagreements (channel counts, extents, ranks).
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument values: empty sets, impossible requests, non-finite input.
class ValueError : public Error {
public:
    using Error::Error;
};

/// File and format failures.
class IoError : public Error {
public:
    using Error::Error;
};

/// File carries an unsupported format version.
class VersionError : public IoError {
public:
    using IoError::IoError;
};

/// File ends early or its framing does not add up.
class TruncationError : public IoError {
public:
    using IoError::IoError;
};

/// Stored checksum does not match the payload.
class ChecksumError : public IoError {
public:
    using IoError::IoError;
};

/// Image bytes could not be decoded.
class DecodeError : public IoError {
public:
    using IoError::IoError;
};

/// Image file is not a format this library reads.
class UnsupportedFormatError : public IoError {
public:
    using IoError::IoError;
};

/// Lookup of an id that is not present.
class UnknownIdError : public Error {
public:
    using Error::Error;
};

/// Training loss left the finite range.
class DivergenceError : public Error {
public:
    using Error::Error;
};

} // namespace rsim
