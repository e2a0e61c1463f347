#pragma once

#include <stdexcept>

namespace sparsect {

/// Thrown when inputs or configuration violate an operation's preconditions.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A CNR region whose background has zero spread.
class DegenerateRoiError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A measurement with no signal power (e.g. an all-zero sinogram).
class DegenerateSignalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace sparsect
