#pragma once

#include <stdexcept>
#include <string>

namespace rgbx {

/// Base class for all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller passed values that violate an operation's contract
/// (length mismatches, empty required inputs, non-finite numbers).
struct ArgumentError : Error {
    using Error::Error;
};

/// A configuration value is out of its legal range or a config file
/// is malformed / contains unknown keys.
struct ConfigError : Error {
    using Error::Error;
};

/// A box violates the corner-form geometry invariants (x2 < x1 etc.).
struct GeometryError : Error {
    using Error::Error;
};

/// Record-level shape problems: a prediction whose box list does not
/// line up with its sample, a manifest line missing required fields.
struct StructuralError : Error {
    using Error::Error;
};

/// A prompt template contains a placeholder that cannot be resolved.
struct TemplateError : Error {
    using Error::Error;
};

/// File read/write failures.
struct IoError : Error {
    using Error::Error;
};

} // namespace rgbx
