#pragma once

// Synthetic closed curves and group actions for tests, demos and simulation.

#include "elastic/contour.hpp"
#include "elastic/core.hpp"
#include "elastic/preshape.hpp"
#include "elastic/shapestats.hpp"

#include <random>
#include <vector>

namespace elastic::synthetic {

/// Star-shaped curve r(phi) = 1 + sum_k (a_k cos k phi + b_k sin k phi).
struct RadialCurve {
    std::vector<double> a;
    std::vector<double> b;

    double radius(double phi) const {
        double r = 1.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double kk = static_cast<double>(k + 1);
            r += a[k] * std::cos(kk * phi) + b[k] * std::sin(kk * phi);
        }
        return r;
    }

    /// Point at curve parameter t (period 1).
    Vec2 point(double t) const {
        const double phi = 2.0 * kPi * t;
        const double r = radius(phi);
        return {r * std::cos(phi), r * std::sin(phi)};
    }

    Contour sample(Eigen::Index n, std::string id = {}) const {
        Field p(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) p.row(i) = point(static_cast<double>(i) / static_cast<double>(n)).transpose();
        return Contour{std::move(p), std::move(id), true};
    }
};

/// Random radial curve with coefficients decaying like 1/k; amplitudes scaled so r stays positive.
template <class Rng>
RadialCurve random_radial_curve(Rng& rng, int harmonics = 6, double amplitude = 0.25) {
    std::normal_distribution<double> z(0.0, 1.0);
    RadialCurve c;
    double total = 0.0;
    for (int k = 2; k <= harmonics + 1; ++k) {
        c.a.resize(static_cast<std::size_t>(k), 0.0);
        c.b.resize(static_cast<std::size_t>(k), 0.0);
        c.a[static_cast<std::size_t>(k - 1)] = z(rng) / k;
        c.b[static_cast<std::size_t>(k - 1)] = z(rng) / k;
        total += std::abs(c.a[static_cast<std::size_t>(k - 1)]) + std::abs(c.b[static_cast<std::size_t>(k - 1)]);
    }
    const double s = total > 0.0 ? amplitude / total * std::min(1.0, total) : 0.0;
    for (auto& v : c.a) v *= s;
    for (auto& v : c.b) v *= s;
    return c;
}

/// Curve with `peaks` evenly spaced bumps of height `height`.
inline RadialCurve peaked_curve(int peaks, double height) {
    RadialCurve c;
    c.a.assign(static_cast<std::size_t>(peaks), 0.0);
    c.b.assign(static_cast<std::size_t>(peaks), 0.0);
    c.a[static_cast<std::size_t>(peaks - 1)] = height;
    return c;
}

/// Smooth periodic warp gamma(t) = t + sum_k c_k sin(2 pi k t) / (2 pi k), with
/// sum |c_k| <= strength < 1 so gamma' >= 1 - strength.
struct SmoothWarp {
    std::vector<double> c;

    double operator()(double t) const {
        double g = t;
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double kk = 2.0 * kPi * static_cast<double>(k + 1);
            g += c[k] * std::sin(kk * t) / kk;
        }
        return g;
    }
};

template <class Rng>
SmoothWarp random_warp(Rng& rng, int harmonics = 3, double strength = 0.5) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    SmoothWarp w;
    double total = 0.0;
    for (int k = 0; k < harmonics; ++k) {
        w.c.push_back(u(rng));
        total += std::abs(w.c.back());
    }
    if (total > 0.0)
        for (auto& v : w.c) v *= strength / total;
    return w;
}

/// Samples R * beta(gamma(t_i + shift)) for the continuous curve beta: a
/// rotated, reparameterised and seed-shifted copy.
inline Contour transformed_copy(const RadialCurve& curve, Eigen::Index n, double angle, const SmoothWarp& warp,
                                double shift, std::string id = {}) {
    const Mat2 rot = rotation_matrix(angle);
    Field p(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n) + shift;
        p.row(i) = (rot * curve.point(warp(t))).transpose();
    }
    return Contour{std::move(p), std::move(id), true};
}

/// `count` L2-orthonormal smooth tangent directions at q that are orthogonal
/// to the orbit directions, drawn from random low-frequency fields. By
/// default the orbit basis uses every grid frequency, so registration cannot
/// absorb the planted variation to first order.
inline std::vector<TangentVector> orbit_normal_directions(const Srvf& q, int count, std::uint64_t seed,
                                                          int orbit_harmonics = 0, int field_harmonics = 4) {
    if (orbit_harmonics <= 0) orbit_harmonics = static_cast<int>(q.size() / 2) - 1;
    std::vector<Field> basis = orbit_basis(q, orbit_harmonics);
    auto absorb = [&basis](Field f) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& e : basis) f -= inner(f, e) * e;
        const double n = norm(f);
        if (n < 1e-8) return false;
        basis.push_back(f / n);
        return true;
    };

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const auto m = q.size();
    std::vector<TangentVector> out;
    for (int attempt = 0; static_cast<int>(out.size()) < count && attempt < 100 * count; ++attempt) {
        Field f = Field::Zero(m, 2);
        for (int k = 1; k <= field_harmonics; ++k)
            for (int c = 0; c < 2; ++c) {
                const double a = z(rng) / k;
                const double b = z(rng) / k;
                for (Eigen::Index i = 0; i < m; ++i) {
                    const double t = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(m);
                    f(i, c) += a * std::cos(t) + b * std::sin(t);
                }
            }
        if (absorb(project_tangent(q, f).samples)) out.emplace_back(basis.back());
    }
    if (static_cast<int>(out.size()) < count) throw Error(ErrorCode::InvalidArgument, "could not build enough directions");
    return out;
}

/// Wrapped-normal model at `mean` with the given variances along orbit-normal directions.
inline SpcaModel planted_model(const Srvf& mean, const std::vector<double>& variances, std::uint64_t seed) {
    SpcaModel model;
    model.mean = mean;
    model.eigenvectors = orbit_normal_directions(mean, static_cast<int>(variances.size()), seed);
    model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(variances.data(), static_cast<Eigen::Index>(variances.size()));
    model.total_variance = model.eigenvalues.sum();
    model.positive_count = static_cast<int>(variances.size());
    return model;
}

/// n draws from a model, seeded per draw so any subset can be regenerated.
inline ShapeEnsemble sample_ensemble(const SpcaModel& model, std::size_t n, std::uint64_t seed,
                                     const std::string& prefix = "s") {
    ShapeEnsemble e;
    for (std::size_t i = 0; i < n; ++i)
        e.add(random_shape(model, seed * 1000003ULL + i, model.rank()), prefix + std::to_string(i));
    return e;
}

} // namespace elastic::synthetic
