#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qbe {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input is well-formed but uses a property we do not support (e.g. stereo WAV).
class UnsupportedFormatError : public Error {
public:
    using Error::Error;
};

// Input is truncated or internally inconsistent.
class CorruptFileError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Metric cannot be computed from the given inputs (e.g. no positive trials).
class EvaluationError : public Error {
public:
    using Error::Error;
};

enum class Severity { kWarning, kError };

struct Diagnostic {
    Severity severity = Severity::kError;
    std::string message;

    friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

using Diagnostics = std::vector<Diagnostic>;

inline bool has_errors(const Diagnostics& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::kError) return true;
    return false;
}

}  // namespace qbe
