#include "support.hpp"

#include <gtest/gtest.h>

using namespace elastic;
using elastic::testing::random_srvf;

namespace {

Field random_field(std::mt19937_64& rng, Eigen::Index m) {
    std::normal_distribution<double> z(0.0, 1.0);
    Field f(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) f.row(i) << z(rng), z(rng);
    return f;
}

Field smooth_field(std::mt19937_64& rng, Eigen::Index m, int harmonics = 4) {
    std::normal_distribution<double> z(0.0, 1.0);
    Field f = Field::Zero(m, 2);
    for (int k = 1; k <= harmonics; ++k)
        for (int c = 0; c < 2; ++c) {
            const double a = z(rng) / k, b = z(rng) / k;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double t = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(m);
                f(i, c) += a * std::cos(t) + b * std::sin(t);
            }
        }
    return f;
}

// Closure, computed by brute force as the Riemann sum of q|q|.
Vec2 brute_closure(const Field& q) {
    Vec2 s = Vec2::Zero();
    for (Eigen::Index i = 0; i < q.rows(); ++i) s += q.row(i).norm() * q.row(i).transpose();
    return s / static_cast<double>(q.rows());
}

} // namespace

TEST(Closure, ResidualMatchesRiemannSum) {
    std::mt19937_64 rng(1);
    const Field f = random_field(rng, 64);
    EXPECT_LT((closure_residual(f) - brute_closure(f)).norm(), 1e-14);
}

TEST(ProjectClosure, LandsOnPreshapeSpace) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Field f = smooth_field(rng, 128) + Field::Constant(128, 2, 0.3);
        const Srvf q = project_closure(f);
        EXPECT_NEAR(norm(q.samples), 1.0, 1e-12);
        EXPECT_LT(closure_residual(q.samples).norm(), 1e-10);
    }
}

TEST(ProjectClosure, FixesPointsAlreadyOnTheSpace) {
    std::mt19937_64 rng(3);
    const Srvf q = random_srvf(rng, 128);
    EXPECT_LT(elastic::testing::max_abs(project_closure(q.samples).samples - q.samples), 1e-14);
}

TEST(ProjectClosure, RejectsZeroInput) {
    try {
        project_closure(Field::Zero(32, 2));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ProjectionDiverged);
    }
}

TEST(ClosureGradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    const Field q = random_srvf(rng, 64).samples;
    const auto g = detail::closure_gradients(q);
    const Field dir = random_field(rng, 64);
    const double h = 1e-6;
    const Vec2 fd = (closure_residual(q + h * dir) - closure_residual(q - h * dir)) / (2 * h);
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(inner(g[static_cast<std::size_t>(a)], dir), fd[a], 1e-7);
}

TEST(ProjectTangent, OrthogonalToNormalsAndIdempotent) {
    std::mt19937_64 rng(5);
    const Srvf q = random_srvf(rng, 128);
    const TangentVector v = project_tangent(q, random_field(rng, 128));
    EXPECT_LT(std::abs(inner(v.samples, q.samples)), 1e-12);
    for (const auto& g : detail::closure_gradients(q.samples)) EXPECT_LT(std::abs(inner(v.samples, g)), 1e-12);
    const TangentVector again = project_tangent(q, v.samples);
    EXPECT_LT(elastic::testing::max_abs(again.samples - v.samples), 1e-12);
}

TEST(ExpMap, StaysOnPreshapeSpaceAndHasRequestedLength) {
    std::mt19937_64 rng(6);
    const Srvf q = random_srvf(rng, 128);
    TangentVector v = project_tangent(q, smooth_field(rng, 128));
    v.samples *= 0.3 / norm(v.samples);
    const Srvf p = exp_map(q, v);
    EXPECT_NEAR(norm(p.samples), 1.0, 1e-12);
    EXPECT_LT(closure_residual(p.samples).norm(), 1e-10);
    // Closed-curve geodesics are shorter than the tangent walk but not by much for short vectors.
    const double d = distance_preshape(q, p);
    EXPECT_NEAR(d, 0.3, 0.01);
}

TEST(ExpMap, ZeroVectorIsIdentity) {
    std::mt19937_64 rng(7);
    const Srvf q = random_srvf(rng, 64);
    const Srvf p = exp_map(q, TangentVector(Field::Zero(64, 2)));
    EXPECT_EQ(elastic::testing::max_abs(p.samples - q.samples), 0.0);
}

TEST(ExpLog, RoundTripRecoversTangentVector) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        const Srvf q = random_srvf(rng, 128);
        TangentVector v = project_tangent(q, smooth_field(rng, 128));
        v.samples *= 0.2 / norm(v.samples);
        const Srvf p = exp_map(q, v);
        const TangentVector back = inverse_exp(q, p);
        EXPECT_LT(norm(back.samples - v.samples), 2e-3 * norm(v.samples)) << trial;
    }
}

TEST(Geodesic, LengthBoundedBelowByGreatCircleAndAboveByPi) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const Srvf a = random_srvf(rng, 128, 0.4);
        const Srvf b = random_srvf(rng, 128, 0.4);
        const GeodesicPath p = geodesic(a, b);
        EXPECT_TRUE(p.converged);
        EXPECT_GE(p.length, sphere_distance(a.samples, b.samples) - 1e-9);
        EXPECT_LE(p.length, kPi);
        for (const auto& w : p.waypoints) {
            EXPECT_NEAR(norm(w), 1.0, 1e-10);
            EXPECT_LT(closure_residual(w).norm(), 1e-9);
        }
    }
}

TEST(Geodesic, EnergyIsMonotoneAndEndpointsFixed) {
    std::mt19937_64 rng(10);
    const Srvf a = random_srvf(rng, 128, 0.5);
    const Srvf b = random_srvf(rng, 128, 0.5);
    const GeodesicPath p = geodesic(a, b);
    for (std::size_t i = 1; i < p.energy_history.size(); ++i)
        EXPECT_LT(p.energy_history[i], p.energy_history[i - 1]);
    EXPECT_EQ(elastic::testing::max_abs(p.waypoints.front() - a.samples), 0.0);
    EXPECT_EQ(elastic::testing::max_abs(p.waypoints.back() - b.samples), 0.0);
}

TEST(Geodesic, SymmetricInEndpoints) {
    std::mt19937_64 rng(11);
    const Srvf a = random_srvf(rng, 128);
    const Srvf b = random_srvf(rng, 128);
    EXPECT_NEAR(distance_preshape(a, b), distance_preshape(b, a), 1e-5);
}

TEST(Geodesic, IdenticalEndpointsGiveZero) {
    std::mt19937_64 rng(12);
    const Srvf a = random_srvf(rng, 64);
    const GeodesicPath p = geodesic(a, a);
    EXPECT_EQ(p.length, 0.0);
    EXPECT_TRUE(p.converged);
    EXPECT_EQ(norm(shooting_vector(p).samples), 0.0);
}

TEST(Geodesic, AntipodalPairIsRejected) {
    std::mt19937_64 rng(13);
    const Srvf a = random_srvf(rng, 64);
    try {
        geodesic(a, Srvf(-a.samples));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AntipodalPair);
    }
}

TEST(Geodesic, RejectsTooFewWaypoints) {
    std::mt19937_64 rng(14);
    const Srvf a = random_srvf(rng, 64);
    GeodesicOptions o;
    o.waypoints = 4;
    EXPECT_THROW(geodesic(a, a, o), Error);
}

TEST(Geodesic, TriangleInequality) {
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 5; ++trial) {
        const Srvf a = random_srvf(rng, 128, 0.4);
        const Srvf b = random_srvf(rng, 128, 0.4);
        const Srvf c = random_srvf(rng, 128, 0.4);
        EXPECT_LE(distance_preshape(a, c), distance_preshape(a, b) + distance_preshape(b, c) + 1e-4);
    }
}
