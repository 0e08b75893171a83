#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace mpcloc {

using Vec3 = Eigen::Vector3d;

/// Speed of light in vacuum [m/s]; default propagation speed everywhere.
inline constexpr double kSpeedOfLight = 299792458.0;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

// Error hierarchy. Every failure the library reports derives from Error so
// callers (e.g. the Monte-Carlo harness) can count failures generically.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class InvalidParams : public Error {
public:
    using Error::Error;
};

class InsufficientMpcs : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

class AntiparallelDirections : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class DegenerateObjective : public Error {
public:
    using Error::Error;
};

class PermutationCapExceeded : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

inline bool is_unit(const Vec3& v, double tol = 1e-12) { return std::abs(v.norm() - 1.0) <= tol; }

}  // namespace mpcloc
