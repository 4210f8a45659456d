#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace skewlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IntMat = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

class NotHyperbolic : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotDominated : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a numerical quantity required by a check is degenerate (e.g. zero coupling).
class DegenerateInput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Angle in [0, 2π). Guards the fmod rounding case that would return exactly 2π.
inline double wrap_angle(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

// Representative of a - b mod 2π in [-π, π).
inline double angle_diff(double a, double b) {
    double d = std::fmod(a - b, kTwoPi);
    if (d >= kPi) d -= kTwoPi;
    if (d < -kPi) d += kTwoPi;
    return d;
}

inline void wrap_in_place(Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = wrap_angle(v[i]);
}

// Max over coordinates of the circular distance.
inline double torus_distance(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, std::abs(angle_diff(a[i], b[i])));
    return m;
}

}  // namespace skewlab
