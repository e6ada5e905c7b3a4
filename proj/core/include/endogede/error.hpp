#pragma once

#include <stdexcept>
#include <string>

namespace endogede {

// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// Bad numeric data: non-finite inputs, degenerate spectra, empty valid sets.
struct ValueError : Error {
    using Error::Error;
};

// Inconsistent configuration (k > E_b, E0 < number of blocks, bad ranges).
struct ConfigError : Error {
    using Error::Error;
};

// File parsing / serialization problems.
struct IoError : Error {
    using Error::Error;
};

} // namespace endogede
