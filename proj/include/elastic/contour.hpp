#pragma once

// Closed planar contours: validation, arc-length resampling, and conversion
// to and from square-root velocity functions.

#include "elastic/core.hpp"
#include "elastic/preshape.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace elastic {

/// Ordered closed polyline. The first point is not repeated at the end.
struct Contour {
    Field points;
    std::string id;
    bool closed = true;

    Eigen::Index size() const { return points.rows(); }
};

struct CurveSpeedAngle {
    Eigen::VectorXd speed;
    Field angle;
};

/// Perturbation (delta p, delta theta) of a speed/angle pair.
struct SpeedAnglePerturbation {
    Eigen::VectorXd dspeed;
    Field dangle;
};

struct MetricComparison {
    double elastic_value = 0.0;
    double l2_srvf_value = 0.0;
};

struct Reconstruction {
    Contour contour;
    /// |beta(1) - beta(0)|: closure defect in curve space.
    double endpoint_gap = 0.0;
};

inline constexpr Eigen::Index kMinContourPoints = 8;
inline constexpr Eigen::Index kMinSamples = 32;

inline double signed_area(const Field& p) {
    const auto n = p.rows();
    double a = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index j = (i + 1) % n;
        a += p(i, 0) * p(j, 1) - p(j, 0) * p(i, 1);
    }
    return 0.5 * a;
}

inline double perimeter(const Field& p) {
    const auto n = p.rows();
    double len = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) len += (p.row((i + 1) % n) - p.row(i)).norm();
    return len;
}

/// Removes consecutive duplicates (including a repeated closing point),
/// checks size and area, and orients the contour counter-clockwise.
inline Contour validate_and_normalize(const Field& raw, std::string id = {}) {
    std::vector<Vec2> pts;
    pts.reserve(static_cast<std::size_t>(raw.rows()));
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const Vec2 p = raw.row(i).transpose();
        if (!p.allFinite()) throw Error(ErrorCode::InputError, "non-finite coordinate in contour '" + id + "'");
        if (pts.empty() || p != pts.back()) pts.push_back(p);
    }
    while (pts.size() > 1 && pts.back() == pts.front()) pts.pop_back();
    if (static_cast<Eigen::Index>(pts.size()) < kMinContourPoints)
        throw Error(ErrorCode::TooFewPoints, "contour '" + id + "' has " + std::to_string(pts.size()) +
                                                 " distinct points, need " + std::to_string(kMinContourPoints));
    Field p(static_cast<Eigen::Index>(pts.size()), 2);
    for (std::size_t i = 0; i < pts.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();

    const double extent = (p.colwise().maxCoeff() - p.colwise().minCoeff()).norm();
    const double area = signed_area(p);
    if (!(extent > 0.0) || std::abs(area) <= 1e-12 * extent * extent)
        throw Error(ErrorCode::DegenerateContour, "contour '" + id + "' encloses no area");
    if (area < 0.0) p = p.colwise().reverse().eval();
    return Contour{std::move(p), std::move(id), true};
}

/// m points equally spaced by arc length along the closed polyline,
/// starting at the first vertex.
inline Contour resample_arclength(const Contour& c, Eigen::Index m) {
    if (m < kMinSamples) throw Error(ErrorCode::InvalidArgument, "resample needs m >= 32");
    const auto n = c.size();
    std::vector<double> cum(static_cast<std::size_t>(n) + 1, 0.0);
    for (Eigen::Index i = 0; i < n; ++i)
        cum[static_cast<std::size_t>(i) + 1] =
            cum[static_cast<std::size_t>(i)] + (c.points.row((i + 1) % n) - c.points.row(i)).norm();
    const double total = cum.back();
    if (!(total > 0.0)) throw Error(ErrorCode::DegenerateContour, "contour has zero length");

    Field out(m, 2);
    std::size_t seg = 0;
    for (Eigen::Index k = 0; k < m; ++k) {
        const double s = total * static_cast<double>(k) / static_cast<double>(m);
        while (seg + 1 < static_cast<std::size_t>(n) && cum[seg + 1] <= s) ++seg;
        const double len = cum[seg + 1] - cum[seg];
        const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
        const auto a = static_cast<Eigen::Index>(seg);
        const Eigen::Index b = (a + 1) % n;
        out.row(k) = (1.0 - f) * c.points.row(a) + f * c.points.row(b);
    }
    return Contour{std::move(out), c.id, true};
}

namespace detail {

/// Contour points treated as samples at uniform parameters j/n, linearly
/// interpolated (periodically) onto the m-point grid.
inline Field parameter_resample(const Field& p, Eigen::Index m) {
    if (p.rows() == m) return p;
    Field out(m, 2);
    for (Eigen::Index i = 0; i < m; ++i)
        out.row(i) = interpolate(p, static_cast<double>(i) / static_cast<double>(m)).transpose();
    return out;
}

} // namespace detail

/// SRVF of a contour on an m-point grid. The curve is rescaled to unit length,
/// differentiated by periodic central differences, mapped to q = b'/sqrt|b'|,
/// and projected onto the pre-shape space.
inline Srvf to_srvf(const Contour& c, Eigen::Index m, const ProjectionOptions& opts = {}) {
    if (m < 3) throw Error(ErrorCode::InvalidArgument, "to_srvf needs m >= 3");
    const double length = perimeter(c.points);
    if (!(length > 0.0)) throw Error(ErrorCode::DegenerateContour, "contour '" + c.id + "' has zero length");
    const Field beta = detail::parameter_resample(c.points, m) / length;
    const Field deriv = periodic_derivative(beta);
    Field q(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double speed = deriv.row(i).norm();
        if (speed < 1e-12)
            throw Error(ErrorCode::DegenerateContour, "vanishing derivative in contour '" + c.id + "'");
        q.row(i) = deriv.row(i) / std::sqrt(speed);
    }
    Srvf out = project_closure(q, opts);
    out.scale = length;
    return out;
}

/// Integrates q|q| by the cumulative trapezoid rule from base_point.
inline Reconstruction from_srvf(const Srvf& q, const Vec2& base_point = Vec2::Zero(), std::string id = {}) {
    const auto m = q.size();
    const Eigen::VectorXd mag = magnitudes(q.samples);
    const Field f = q.samples.array().colwise() * mag.array();
    const double h = 1.0 / static_cast<double>(m);
    Field beta(m, 2);
    beta.row(0) = base_point.transpose();
    for (Eigen::Index i = 1; i < m; ++i) beta.row(i) = beta.row(i - 1) + 0.5 * h * (f.row(i - 1) + f.row(i));
    const Eigen::RowVector2d end = beta.row(m - 1) + 0.5 * h * (f.row(m - 1) + f.row(0));
    Reconstruction r;
    r.endpoint_gap = (end - beta.row(0)).norm();
    r.contour = Contour{std::move(beta), std::move(id), true};
    return r;
}

/// Speed p = |b'| and unit tangent theta = b'/|b'| on the contour's own
/// uniform parameterisation.
inline CurveSpeedAngle speed_angle(const Contour& c) {
    const Field d = periodic_derivative(c.points);
    CurveSpeedAngle out{Eigen::VectorXd(d.rows()), Field(d.rows(), 2)};
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        const double p = d.row(i).norm();
        if (p < 1e-12) throw Error(ErrorCode::DegenerateContour, "vanishing derivative in contour '" + c.id + "'");
        out.speed[i] = p;
        out.angle.row(i) = d.row(i) / p;
    }
    return out;
}

namespace detail {

inline Eigen::VectorXd angular_rate(const CurveSpeedAngle& base, const SpeedAnglePerturbation& pert) {
    const auto m = base.speed.size();
    Eigen::VectorXd omega(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vec2 th = base.angle.row(i).transpose();
        const Vec2 dth = pert.dangle.row(i).transpose();
        const double along = th.dot(dth);
        if (std::abs(along) > 1e-8 * (1.0 + dth.norm()))
            throw Error(ErrorCode::NonTangentPerturbation, "angle perturbation is not orthogonal to theta");
        omega[i] = th.x() * dth.y() - th.y() * dth.x();
    }
    return omega;
}

/// Directional derivative of (p, theta) -> sqrt(p) theta by central
/// differences, moving theta along the unit circle.
inline Field srvf_perturbation(const CurveSpeedAngle& base, const SpeedAnglePerturbation& pert) {
    const auto m = base.speed.size();
    const Eigen::VectorXd omega = angular_rate(base, pert);
    double scale = 1.0;
    for (Eigen::Index i = 0; i < m; ++i)
        scale = std::max({scale, std::abs(pert.dspeed[i]) / base.speed[i], std::abs(omega[i])});
    const double eps = 1e-4 / scale;
    Field dq(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vec2 th = base.angle.row(i).transpose();
        auto eval = [&](double e) {
            const Vec2 rotated = rotation_matrix(e * omega[i]) * th;
            return Vec2(std::sqrt(base.speed[i] + e * pert.dspeed[i]) * rotated);
        };
        dq.row(i) = ((eval(eps) - eval(-eps)) / (2.0 * eps)).transpose();
    }
    return dq;
}

} // namespace detail

/// Evaluates the elastic metric with weights (a, b) alongside the L2 inner
/// product of the induced SRVF perturbations.
inline MetricComparison elastic_metric_check(const CurveSpeedAngle& base, const SpeedAnglePerturbation& p1,
                                             const SpeedAnglePerturbation& p2, double a = 0.25, double b = 1.0) {
    const auto m = base.speed.size();
    if (p1.dspeed.size() != m || p2.dspeed.size() != m || p1.dangle.rows() != m || p2.dangle.rows() != m)
        throw Error(ErrorCode::InvalidArgument, "perturbation size mismatch");
    detail::angular_rate(base, p1);
    detail::angular_rate(base, p2);
    double stretch = 0.0;
    double bend = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        stretch += p1.dspeed[i] * p2.dspeed[i] / base.speed[i];
        bend += p1.dangle.row(i).dot(p2.dangle.row(i)) * base.speed[i];
    }
    MetricComparison out;
    out.elastic_value = (a * stretch + b * bend) / static_cast<double>(m);
    out.l2_srvf_value = inner(detail::srvf_perturbation(base, p1), detail::srvf_perturbation(base, p2));
    return out;
}

} // namespace elastic
