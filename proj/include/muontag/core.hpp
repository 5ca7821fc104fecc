// Basic value types shared by every stage of the muon-tagging chain.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace muontag {

inline constexpr double kPi = 3.14159265358979323846;

//! Root of the library's exception hierarchy.
class Error : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error
{
  public:
    using Error::Error;
};

class FormatError : public Error
{
  public:
    using Error::Error;
};

class InvalidArgument : public Error
{
  public:
    using Error::Error;
};

class FitError : public Error
{
  public:
    using Error::Error;
};

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](int axis) const
    {
        return axis == 0 ? x : (axis == 1 ? y : z);
    }
    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    constexpr Vec3 cross(const Vec3& o) const
    {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const
    {
        double n = norm();
        return {x / n, y / n, z / n};
    }
    constexpr bool operator==(const Vec3&) const = default;
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

//! Silicon detector identifiers. The underlying value doubles as the DAQ
//! channel index.
enum class DetectorId : std::uint8_t
{
    Top = 0,
    Center = 1,
    Bottom = 2,
};

inline constexpr int kNumDetectors = 3;
inline constexpr std::array<DetectorId, kNumDetectors> kAllDetectors{
    DetectorId::Top, DetectorId::Center, DetectorId::Bottom};

constexpr int index_of(DetectorId id) { return static_cast<int>(id); }

inline std::string_view to_string(DetectorId id)
{
    switch (id)
    {
        case DetectorId::Top: return "TOP";
        case DetectorId::Center: return "CENTER";
        case DetectorId::Bottom: return "BOTTOM";
    }
    return "UNKNOWN";
}

inline DetectorId detector_from_string(std::string_view s)
{
    if (s == "TOP") return DetectorId::Top;
    if (s == "CENTER") return DetectorId::Center;
    if (s == "BOTTOM") return DetectorId::Bottom;
    throw FormatError("unknown detector id '" + std::string(s) + "'");
}

enum class Species : std::uint8_t
{
    Muon = 0,
    Gamma = 1,
};

inline std::string_view to_string(Species s)
{
    return s == Species::Muon ? "MUON" : "GAMMA";
}

inline Species species_from_string(std::string_view s)
{
    if (s == "MUON") return Species::Muon;
    if (s == "GAMMA") return Species::Gamma;
    throw FormatError("unknown species '" + std::string(s) + "'");
}

//! A value with a one-standard-deviation uncertainty.
struct Measurement
{
    double value = 0.0;
    double error = 0.0;

    constexpr bool operator==(const Measurement&) const = default;
};

inline Measurement operator-(const Measurement& a, const Measurement& b)
{
    return {a.value - b.value, std::hypot(a.error, b.error)};
}

inline Measurement operator+(const Measurement& a, const Measurement& b)
{
    return {a.value + b.value, std::hypot(a.error, b.error)};
}

}  // namespace muontag
