#pragma once

#include <stdexcept>
#include <string>

namespace smi {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Balance condition has no real solution (|required cosine| > 1).
struct NoSolutionError : std::runtime_error {
    explicit NoSolutionError(const std::string& what) : std::runtime_error(what) {}
};

struct InsufficientSpanError : std::runtime_error {
    explicit InsufficientSpanError(const std::string& what) : std::runtime_error(what) {}
};

struct TooShortError : std::runtime_error {
    explicit TooShortError(const std::string& what) : std::runtime_error(what) {}
};

struct BandEmptyError : std::runtime_error {
    explicit BandEmptyError(const std::string& what) : std::runtime_error(what) {}
};

struct TauOutOfRangeError : std::runtime_error {
    explicit TauOutOfRangeError(const std::string& what) : std::runtime_error(what) {}
};

/// A mixture component collapsed below the resolvable width floor.
struct DegenerateError : std::runtime_error {
    explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

struct NotConvergedError : std::runtime_error {
    explicit NotConvergedError(const std::string& what) : std::runtime_error(what) {}
};

struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace smi
