#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace continuum {

/// Positions are in cm, directions are unit vectors.
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A frame handed to the kinematics is not orthonormal.
class InvalidFrameError : public Error {
public:
    using Error::Error;
};

/// Bad bounds, bad design, mismatched sizes.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// Algorithm parameters outside their admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the byte offset where parsing stopped.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Workspace geometry that cannot be turned into targets.
class IngestionError : public Error {
public:
    using Error::Error;
};

/// Wrap an angle into [0, 2pi).
inline double wrap_angle(double angle) {
    double wrapped = std::fmod(angle, kTwoPi);
    if (wrapped < 0.0) wrapped += kTwoPi;
    if (wrapped >= kTwoPi) wrapped = 0.0;
    return wrapped;
}

} // namespace continuum
