#pragma once

// Geometry of the pre-shape space: unit-norm SRVFs of closed curves.
//
// The pre-shape space is the intersection of the unit L2 sphere with the
// closure set {q : integral of q|q| = 0}. Its normal space at q is spanned by
// q itself and the two gradients of the closure functional.

#include "elastic/core.hpp"

#include <array>
#include <vector>

namespace elastic {

struct ProjectionOptions {
    double residual_tol = 1e-10;
    int max_iterations = 200;
};

struct GeodesicOptions {
    int waypoints = 7;
    /// Relative energy decrease that stops straightening. Waypoint error scales
    /// like its square root.
    double energy_tol = 1e-8;
    int max_iterations = 300;
    double min_step = 1e-6;
    ProjectionOptions projection{};
};

struct ExpOptions {
    /// Largest sub-step length used when shooting along the closure manifold.
    double max_substep = 0.005;
    ProjectionOptions projection{};
};

struct GeodesicPath {
    std::vector<Field> waypoints;
    double length = 0.0;
    bool converged = false;
    int iterations = 0;
    /// Discrete path energy after initialisation and after every accepted step.
    std::vector<double> energy_history;
};

namespace detail {

/// Gradients of the two components of the closure functional at q.
inline std::array<Field, 2> closure_gradients(const Field& q) {
    const auto m = q.rows();
    std::array<Field, 2> g{Field(m, 2), Field(m, 2)};
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vec2 qi = q.row(i).transpose();
        const double mag = qi.norm();
        const Vec2 unit = mag > 1e-300 ? Vec2(qi / mag) : Vec2::Zero();
        for (int k = 0; k < 2; ++k) {
            Vec2 gk = qi[k] * unit;
            gk[k] += mag;
            g[static_cast<std::size_t>(k)].row(i) = gk.transpose();
        }
    }
    return g;
}

/// L2-orthonormal basis of the normal space {q, grad G_1, grad G_2}.
inline std::vector<Field> normal_basis(const Field& q) {
    auto g = closure_gradients(q);
    std::vector<Field> basis;
    basis.reserve(3);
    for (const Field* candidate : std::array<const Field*, 3>{&q, &g[0], &g[1]}) {
        Field b = *candidate;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& e : basis) b -= inner(b, e) * e;
        const double n = norm(b);
        if (n > 1e-12) basis.push_back(b / n);
    }
    return basis;
}

inline Field sphere_exp(const Field& q, const Field& v) {
    const double t = norm(v);
    if (t == 0.0) return q;
    return std::cos(t) * q + (std::sin(t) / t) * v;
}

inline double path_energy(const std::vector<Field>& path) {
    double e = 0.0;
    for (std::size_t j = 0; j + 1 < path.size(); ++j) {
        const double d = norm(path[j + 1] - path[j]);
        e += d * d;
    }
    return e * static_cast<double>(path.size() - 1);
}

inline double segment_arc(const Field& a, const Field& b) {
    const double chord = norm(b - a);
    return 2.0 * std::asin(std::min(1.0, chord / 2.0));
}

inline double path_length(const std::vector<Field>& path) {
    double len = 0.0;
    for (std::size_t j = 0; j + 1 < path.size(); ++j) len += segment_arc(path[j], path[j + 1]);
    return len;
}

inline bool is_antipodal(const Field& q1, const Field& q2) { return inner(q1, q2) < -1.0 + 1e-9; }

} // namespace detail

/// Projects arbitrary nonzero samples onto the pre-shape space by Newton
/// iterations on the closure constraint, interleaved with renormalisation.
inline Srvf project_closure(const Field& raw, const ProjectionOptions& opts = {}) {
    const double n0 = norm(raw);
    if (!(n0 > 1e-300) || !std::isfinite(n0))
        throw Error(ErrorCode::ProjectionDiverged, "input has zero or non-finite norm");
    Field q = raw / n0;
    for (int it = 0; it < opts.max_iterations; ++it) {
        const Vec2 r = closure_residual(q);
        const double rn = r.norm();
        if (rn < opts.residual_tol) return Srvf(std::move(q));
        const auto g = detail::closure_gradients(q);
        Mat2 jac;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                jac(a, b) = inner(g[static_cast<std::size_t>(a)], g[static_cast<std::size_t>(b)]);
        if (std::abs(jac.determinant()) < 1e-300)
            throw Error(ErrorCode::ProjectionDiverged, "singular closure Jacobian");
        const Vec2 c = jac.fullPivLu().solve(-r);
        // Damped Newton: halve until the residual drops.
        double step = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls) {
            Field trial = q + step * (c[0] * g[0] + c[1] * g[1]);
            const double tn = norm(trial);
            if (tn > 1e-300) {
                trial /= tn;
                if (closure_residual(trial).norm() < rn) {
                    q = std::move(trial);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (rn < 1e3 * opts.residual_tol) return Srvf(std::move(q));
            throw Error(ErrorCode::ProjectionDiverged, "closure residual stalled");
        }
    }
    if (closure_residual(q).norm() < opts.residual_tol) return Srvf(std::move(q));
    throw Error(ErrorCode::ProjectionDiverged, "closure projection did not converge");
}

/// Removes the normal components (along q and the closure gradients) of w.
inline TangentVector project_tangent(const Srvf& q, const Field& w) {
    Field out = w;
    const auto basis = detail::normal_basis(q.samples);
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& e : basis) out -= inner(out, e) * e;
    return TangentVector(std::move(out));
}

/// Exponential map on the pre-shape space, realised by shooting along v in
/// short sphere-exponential sub-steps, each followed by closure projection and
/// a tangent re-projection of the velocity.
inline Srvf exp_map(const Srvf& q, const TangentVector& v, const ExpOptions& opts = {}) {
    const double len = norm(v.samples);
    if (len == 0.0) return q;
    const int steps = std::max(1, static_cast<int>(std::ceil(len / opts.max_substep)));
    Srvf cur = q;
    Field vel = v.samples;
    for (int s = 0; s < steps; ++s) {
        Srvf next = project_closure(detail::sphere_exp(cur.samples, vel / steps), opts.projection);
        if (s + 1 < steps) {
            Field moved = project_tangent(next, vel).samples;
            const double mn = norm(moved);
            if (mn > 0.0) vel = moved * (len / mn);
        }
        cur = std::move(next);
    }
    cur.scale = q.scale;
    return cur;
}

/// Geodesic between two pre-shapes by path straightening: a great-circle
/// initial path projected waypoint-wise onto the closure manifold, then
/// projected gradient descent on the discrete path energy with backtracking.
inline GeodesicPath geodesic(const Srvf& q1, const Srvf& q2, const GeodesicOptions& opts = {}) {
    if (opts.waypoints < 5) throw Error(ErrorCode::InvalidArgument, "geodesic needs at least 5 waypoints");
    if (q1.size() != q2.size()) throw Error(ErrorCode::InvalidArgument, "sample counts differ");
    if (detail::is_antipodal(q1.samples, q2.samples))
        throw Error(ErrorCode::AntipodalPair, "endpoints are antipodal");

    const int k = opts.waypoints;
    GeodesicPath path;
    path.waypoints.resize(static_cast<std::size_t>(k));
    const double theta = sphere_distance(q1.samples, q2.samples);
    if (norm(q1.samples - q2.samples) < 1e-14) {
        for (auto& w : path.waypoints) w = q1.samples;
        path.length = 0.0;
        path.converged = true;
        path.energy_history.push_back(0.0);
        return path;
    }
    const double st = std::sin(theta);
    for (int j = 0; j < k; ++j) {
        const double tau = static_cast<double>(j) / (k - 1);
        auto& w = path.waypoints[static_cast<std::size_t>(j)];
        if (j == 0) {
            w = q1.samples;
        } else if (j == k - 1) {
            w = q2.samples;
        } else {
            const Field arc = (std::sin((1.0 - tau) * theta) * q1.samples + std::sin(tau * theta) * q2.samples) / st;
            w = project_closure(arc, opts.projection).samples;
        }
    }

    double energy = detail::path_energy(path.waypoints);
    path.energy_history.push_back(energy);
    for (int it = 0; it < opts.max_iterations; ++it) {
        std::vector<Field> dirs(static_cast<std::size_t>(k));
        for (int j = 1; j + 1 < k; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const Field pull = 0.5 * (path.waypoints[ju - 1] + path.waypoints[ju + 1]) - path.waypoints[ju];
            dirs[ju] = project_tangent(Srvf(path.waypoints[ju]), pull).samples;
        }
        double step = 1.0;
        std::vector<Field> trial;
        double trial_energy = energy;
        bool improved = false;
        while (step >= opts.min_step) {
            trial = path.waypoints;
            for (int j = 1; j + 1 < k; ++j) {
                const auto ju = static_cast<std::size_t>(j);
                trial[ju] = project_closure(detail::sphere_exp(path.waypoints[ju], step * dirs[ju]), opts.projection).samples;
            }
            trial_energy = detail::path_energy(trial);
            if (trial_energy < energy) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        path.iterations = it + 1;
        if (!improved) {
            path.converged = true;
            break;
        }
        const double rel = (energy - trial_energy) / energy;
        path.waypoints = std::move(trial);
        energy = trial_energy;
        path.energy_history.push_back(energy);
        if (rel < opts.energy_tol) {
            path.converged = true;
            break;
        }
    }
    path.length = detail::path_length(path.waypoints);
    return path;
}

/// Initial velocity of a computed geodesic, scaled to the path length.
inline TangentVector shooting_vector(const GeodesicPath& path) {
    const auto& w = path.waypoints;
    const Field& base = w.front();
    if (path.length == 0.0 || w.size() < 2) return TangentVector(Field::Zero(base.rows(), 2));
    const double k1 = static_cast<double>(w.size() - 1);
    Field v = project_tangent(Srvf(base), (w[1] - base) * k1).samples;
    const double n = norm(v);
    if (n == 0.0) return TangentVector(Field::Zero(base.rows(), 2));
    return TangentVector(v * (path.length / n));
}

/// Inverse exponential map, extracted from the path-straightening geodesic.
inline TangentVector inverse_exp(const Srvf& q1, const Srvf& q2, const GeodesicOptions& opts = {}) {
    const GeodesicPath path = geodesic(q1, q2, opts);
    if (!path.converged)
        throw Error(ErrorCode::GeodesicNotConverged, "path straightening hit its iteration cap");
    return shooting_vector(path);
}

inline double distance_preshape(const Srvf& q1, const Srvf& q2, const GeodesicOptions& opts = {}) {
    return geodesic(q1, q2, opts).length;
}

} // namespace elastic
