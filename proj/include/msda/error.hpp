#pragma once

#include <stdexcept>
#include <string>

namespace msda {

/// Input text that does not conform to an expected file format.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix or vector dimensions that do not line up.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter value outside its admissible range.
class InvalidArgument : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear system too close to singular to solve reliably.
class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or a violated numeric postcondition.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dataset unusable for the requested operation (empty corpus,
/// single-class labels, too few examples per fold, unknown domain id).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace msda
