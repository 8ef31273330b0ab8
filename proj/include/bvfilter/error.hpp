#pragma once

#include <stdexcept>
#include <string>

namespace bvfilter {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed grids, misaligned intervals, mismatched path lengths.
class GridError : public Error {
public:
    using Error::Error;
};

/// Scenario failed validation or is unsuitable for the requested method.
class ScenarioError : public Error {
public:
    using Error::Error;
};

/// NaN/overflow, CFL violation, filter collapse.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Missing or unreadable files, malformed inputs.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace bvfilter
