#pragma once

// Core value types for elastic shape analysis of closed planar curves.
//
// All curve-valued data lives on a uniform periodic grid t_i = i/m, i = 0..m-1,
// and every integral is the periodic trapezoidal rule, which on a uniform
// grid reduces to the sample mean.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace elastic {

/// m x 2 block of R^2 samples on the periodic grid.
using Field = Eigen::Matrix<double, Eigen::Dynamic, 2>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class ErrorCode {
    TooFewPoints,
    DegenerateContour,
    NonTangentPerturbation,
    ProjectionDiverged,
    AntipodalPair,
    GeodesicNotConverged,
    InvalidWarp,
    MeanNotConverged,
    InvalidDistanceMatrix,
    GroupTooSmall,
    InvalidCounts,
    NonBinaryCovariate,
    InvalidArgument,
    InputError,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateContour: return "DegenerateContour";
    case ErrorCode::NonTangentPerturbation: return "NonTangentPerturbation";
    case ErrorCode::ProjectionDiverged: return "ProjectionDiverged";
    case ErrorCode::AntipodalPair: return "AntipodalPair";
    case ErrorCode::GeodesicNotConverged: return "GeodesicNotConverged";
    case ErrorCode::InvalidWarp: return "InvalidWarp";
    case ErrorCode::MeanNotConverged: return "MeanNotConverged";
    case ErrorCode::InvalidDistanceMatrix: return "InvalidDistanceMatrix";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::InvalidCounts: return "InvalidCounts";
    case ErrorCode::NonBinaryCovariate: return "NonBinaryCovariate";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InputError: return "InputError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Square-root velocity function sampled on the periodic grid.
struct Srvf {
    Field samples;
    /// Length of the curve before unit-length rescaling.
    double scale = 1.0;

    Srvf() = default;
    explicit Srvf(Field s, double sc = 1.0) : samples(std::move(s)), scale(sc) {}

    Eigen::Index size() const { return samples.rows(); }
};

/// Element of the tangent space at an Srvf.
struct TangentVector {
    Field samples;
    std::string base_id;

    TangentVector() = default;
    explicit TangentVector(Field s, std::string base = {})
        : samples(std::move(s)), base_id(std::move(base)) {}

    Eigen::Index size() const { return samples.rows(); }
};

// ---------------------------------------------------------------------------
// L2 geometry on the grid

inline double inner(const Field& a, const Field& b) {
    return a.cwiseProduct(b).sum() / static_cast<double>(a.rows());
}

inline double norm(const Field& a) { return std::sqrt(inner(a, a)); }

/// Pointwise Euclidean magnitude |q(t_i)|.
inline Eigen::VectorXd magnitudes(const Field& q) { return q.rowwise().norm(); }

/// Closure residual G(q) = integral of q|q|.
inline Vec2 closure_residual(const Field& q) {
    const Eigen::VectorXd mag = magnitudes(q);
    Vec2 r = (q.array().colwise() * mag.array()).colwise().sum().transpose();
    return r / static_cast<double>(q.rows());
}

/// Great-circle distance on the unit Hilbert sphere.
inline double sphere_distance(const Field& a, const Field& b) {
    const double c = std::clamp(inner(a, b), -1.0, 1.0);
    return std::acos(c);
}

inline Mat2 rotation_matrix(double angle) {
    Mat2 r;
    r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return r;
}

/// Applies a 2x2 matrix to every sample.
inline Field rotate(const Field& q, const Mat2& o) { return q * o.transpose(); }

inline std::size_t wrap_index(long i, std::size_t m) {
    const long mm = static_cast<long>(m);
    long r = i % mm;
    return static_cast<std::size_t>(r < 0 ? r + mm : r);
}

/// Periodic linear interpolation of a field at parameter x (any real, period 1).
inline Vec2 interpolate(const Field& q, double x) {
    const auto m = static_cast<std::size_t>(q.rows());
    const double y = x * static_cast<double>(m);
    const double fl = std::floor(y);
    const double f = y - fl;
    const std::size_t i0 = wrap_index(static_cast<long>(fl), m);
    const std::size_t i1 = (i0 + 1) % m;
    return (1.0 - f) * q.row(static_cast<Eigen::Index>(i0)).transpose() +
           f * q.row(static_cast<Eigen::Index>(i1)).transpose();
}

/// Circular shift: result(i) = q(i + shift), with fractional shifts interpolated.
inline Field circular_shift(const Field& q, double shift) {
    const auto m = q.rows();
    Field out(m, 2);
    const double rounded = std::round(shift);
    if (std::abs(shift - rounded) < 1e-12) {
        const long s = static_cast<long>(rounded);
        for (Eigen::Index i = 0; i < m; ++i)
            out.row(i) = q.row(static_cast<Eigen::Index>(wrap_index(i + s, static_cast<std::size_t>(m))));
        return out;
    }
    for (Eigen::Index i = 0; i < m; ++i)
        out.row(i) = interpolate(q, (static_cast<double>(i) + shift) / static_cast<double>(m)).transpose();
    return out;
}

/// Periodic five-point central-difference derivative with respect to t in [0,1).
/// Differences telescope, so the derivative of a closed curve integrates to zero.
inline Field periodic_derivative(const Field& p) {
    const auto n = p.rows();
    Field d(n, 2);
    const double scale = static_cast<double>(n) / 12.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto near = p.row((i + 1) % n) - p.row((i + n - 1) % n);
        const auto far = p.row((i + 2) % n) - p.row((i + n - 2) % n);
        d.row(i) = (8.0 * near - far) * scale;
    }
    return d;
}

inline constexpr double kPi = std::numbers::pi;

} // namespace elastic
