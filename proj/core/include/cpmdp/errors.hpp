#pragma once

#include <stdexcept>
#include <string>

namespace cpmdp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A requested size does not fit (integer overflow, dense cap exceeded).
class SizingError : public Error {
public:
    using Error::Error;
};

/// An index or coordinate lies outside its range.
class BoundsError : public Error {
public:
    using Error::Error;
};

/// Infeasible placement request (too many obstacles/terminals for the grid).
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Operation applied to a state it is not defined for (e.g. an obstacle).
class InvalidStateError : public Error {
public:
    using Error::Error;
};

/// Malformed GridSpec or input file contents.
class SpecError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cpmdp
