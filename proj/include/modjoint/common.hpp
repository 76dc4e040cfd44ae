#pragma once

#include <stdexcept>
#include <string>

namespace modjoint {

// Service modes offered to a customer. `Outside` is the competing
// alternative the platform does not control.
enum class Mode { Exclusive, Shared, Outside };

inline const char* mode_name(Mode m) {
    switch (m) {
        case Mode::Exclusive: return "exclusive";
        case Mode::Shared: return "shared";
        case Mode::Outside: return "outside";
    }
    return "?";
}

using NodeId = int;
using RequestId = int;
using VehicleId = int;
using ClusterId = int;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad parameter or malformed input file (CLI maps this to exit code 1).
struct ValidationError : Error {
    using Error::Error;
};

// Shortest-path query between disconnected nodes.
struct NoPathError : Error {
    using Error::Error;
};

// Steady-state / utilization calibration has no feasible solution.
struct CalibrationError : Error {
    using Error::Error;
};

constexpr double kSecondsPerDay = 86400.0;
constexpr double kMetersPerMile = 1609.344;

inline double meters_to_miles(double m) { return m / kMetersPerMile; }

}  // namespace modjoint
