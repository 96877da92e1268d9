#pragma once

// Registration of one SRVF to another over rotations, seed placement and
// reparameterisations, and the resulting shape distances.
//
// Elastic registration runs a lattice dynamic program over monotone warps for
// a set of candidate seeds, alternating with closed-form optimal rotations,
// and then polishes the best lattice warp with a damped Gauss-Newton solve
// over a truncated Fourier expansion of the warp (plus a fractional seed and
// the rotation angle). The lattice warp is kept whenever polishing does not
// lower the matching cost.

#include "elastic/core.hpp"
#include "elastic/ensemble.hpp"
#include "elastic/parallel.hpp"
#include "elastic/preshape.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace elastic {

/// Samples gamma(t_i), i = 0..m, of a nondecreasing warp with gamma(t_m) - gamma(t_0) = 1.
using Warp = Eigen::VectorXd;

struct LatticeStep {
    int di = 1;
    int dj = 1;
};

/// Lattice steps giving local slopes {1, 2/3, 3/2, 1/2, 2, 1/3, 3}, ordered by
/// closeness of the slope to 1 (the DP tie-break order).
inline std::vector<LatticeStep> default_slope_set() {
    return {{1, 1}, {3, 2}, {2, 3}, {2, 1}, {1, 2}, {3, 1}, {1, 3}};
}

struct RegistrationOptions {
    /// Seed search stride in grid steps; 0 selects m/16.
    int seed_stride = 0;
    bool refine_seed = true;
    /// Best coarse seeds kept as finalists; each gets a local seed search
    /// (when refine_seed is set), the full rotation / DP rounds and the polish.
    int refine_candidates = 3;
    std::vector<LatticeStep> slopes = default_slope_set();
    int max_rounds = 20;
    double round_tol = 1e-6;
    bool continuous_refinement = true;
    /// Fourier harmonics of the refined warp; 0 selects m/4. Strong warps have inverses with slowly decaying spectra.
    int harmonics = 0;
    int refinement_iterations = 60;
};

struct DistanceOptions {
    RegistrationOptions registration{};
    GeodesicOptions geodesic{};
};

struct RotationResult {
    Mat2 rotation = Mat2::Identity();
    bool rank_deficient = false;
};

struct Registration {
    Mat2 rotation = Mat2::Identity();
    /// Seed placement in grid steps. Integral from the seed search; may become
    /// fractional after continuous refinement.
    double seed_shift = 0.0;
    Warp warp;
    Srvf registered_srvf;
    /// Squared L2 matching cost ||q1 - O (q2 shifted, warped)||^2 before closure projection.
    double objective = 0.0;
    /// Shape distance for this registration (sphere distance until a geodesic is computed).
    double distance = 0.0;
    int rounds = 0;
    bool refined = false;
    bool elastic = true;
};

struct DpResult {
    double cost = 0.0;
    /// Lattice knots (i, j) from (0, 0) to (m, m).
    std::vector<std::pair<int, int>> knots;
    Warp warp;
};

struct ShapeDistance {
    double distance = 0.0;
    Registration registration;
    GeodesicPath path;
    /// Distances for each candidate: elastic, nonelastic, unregistered.
    double elastic_candidate = 0.0;
    double nonelastic_candidate = 0.0;
    double identity_candidate = 0.0;
};

enum class DistanceMode { Elastic, Nonelastic };

inline const char* to_string(DistanceMode mode) { return mode == DistanceMode::Elastic ? "elastic" : "nonelastic"; }

inline Warp identity_warp(Eigen::Index m) { return Eigen::VectorXd::LinSpaced(m + 1, 0.0, 1.0); }

inline RotationResult optimal_rotation(const Srvf& q1, const Srvf& q2) {
    if (q1.size() != q2.size()) throw Error(ErrorCode::InvalidArgument, "sample counts differ");
    const Mat2 a = q1.samples.transpose() * q2.samples / static_cast<double>(q1.size());
    RotationResult out;
    if (a.norm() < 1e-12) {
        out.rank_deficient = true;
        return out;
    }
    Eigen::JacobiSVD<Mat2> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat2 u = svd.matrixU();
    const Mat2 v = svd.matrixV();
    Mat2 d = Mat2::Identity();
    d(1, 1) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    out.rotation = u * d * v.transpose();
    return out;
}

inline void validate_warp(const Warp& warp, Eigen::Index m) {
    if (warp.size() != m + 1) throw Error(ErrorCode::InvalidWarp, "warp must have m + 1 samples");
    if (std::abs(warp[m] - warp[0] - 1.0) > 1e-12) throw Error(ErrorCode::InvalidWarp, "warp must advance by one period");
    for (Eigen::Index i = 0; i < m; ++i)
        if (!(warp[i + 1] >= warp[i])) throw Error(ErrorCode::InvalidWarp, "warp is not nondecreasing");
}

/// (q o gamma) sqrt(gamma'), with gamma' from periodic central differences.
inline Srvf reparam_action(const Srvf& q, const Warp& warp) {
    const auto m = q.size();
    validate_warp(warp, m);
    Field out(m, 2);
    const double half = 0.5 * static_cast<double>(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double next = warp[i + 1];
        const double prev = i == 0 ? warp[m - 1] - 1.0 : warp[i - 1];
        const double rate = (next - prev) * half;
        out.row(i) = interpolate(q.samples, warp[i]).transpose() * std::sqrt(std::max(rate, 0.0));
    }
    return Srvf(std::move(out), q.scale);
}

namespace detail {

inline double matching_cost(const Field& q1, const Field& q2) {
    return (q1 - q2).squaredNorm() / static_cast<double>(q1.rows());
}

inline Warp warp_from_knots(const std::vector<std::pair<int, int>>& knots, Eigen::Index m) {
    Warp g(m + 1);
    for (std::size_t s = 0; s + 1 < knots.size(); ++s) {
        const auto [k, l] = knots[s];
        const auto [i, j] = knots[s + 1];
        for (int u = k; u < i; ++u)
            g[u] = (l + static_cast<double>(j - l) * (u - k) / static_cast<double>(i - k)) / static_cast<double>(m);
    }
    g[m] = 1.0;
    return g;
}

} // namespace detail

/// Minimum-cost monotone lattice path from (0,0) to (m,m) with the given
/// step set. q2 is used as given (already shifted and rotated).
inline DpResult dp_match(const Srvf& q1, const Srvf& q2, const std::vector<LatticeStep>& slopes = default_slope_set()) {
    const auto m = static_cast<int>(q1.size());
    if (q2.size() != m) throw Error(ErrorCode::InvalidArgument, "sample counts differ");
    if (slopes.empty()) throw Error(ErrorCode::InvalidArgument, "empty slope set");
    // q2 tabulated on a grid fine enough that every segment sample lands on a node.
    int fine = 1;
    for (const auto& st : slopes) {
        if (st.di < 1 || st.dj < 1) throw Error(ErrorCode::InvalidArgument, "lattice steps must be positive");
        fine = std::lcm(fine, st.di);
    }
    const Field& a = q1.samples;
    const Field& b = q2.samples;
    Eigen::Matrix<double, 2, Eigen::Dynamic> table(2, fine * m + 1);
    for (int p = 0; p <= fine * m; ++p) {
        const int cell = p / fine;
        const double f = static_cast<double>(p % fine) / fine;
        table.col(p) = (1.0 - f) * b.row(cell % m).transpose() + f * b.row((cell + 1) % m).transpose();
    }
    struct Step {
        int di, dj, stride;
        double root;
    };
    std::vector<Step> steps;
    for (const auto& st : slopes)
        steps.push_back({st.di, st.dj, fine * st.dj / st.di, std::sqrt(static_cast<double>(st.dj) / st.di)});
    const Eigen::Matrix<double, 2, Eigen::Dynamic> at = a.transpose();
    const double inv_m = 1.0 / static_cast<double>(m);

    const auto stride = static_cast<std::size_t>(m + 1);
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> energy(stride * stride, inf);
    std::vector<std::int8_t> pred(stride * stride, -1);
    energy[0] = 0.0;
    for (int i = 1; i <= m; ++i) {
        for (int j = 1; j <= m; ++j) {
            double best = inf;
            std::int8_t arg = -1;
            for (std::size_t s = 0; s < steps.size(); ++s) {
                const Step& st = steps[s];
                const int k = i - st.di;
                const int l = j - st.dj;
                if (k < 0 || l < 0) continue;
                const double base = energy[static_cast<std::size_t>(k) * stride + static_cast<std::size_t>(l)];
                if (base == inf) continue;
                double c = 0.0;
                for (int u = 0; u < st.di; ++u) {
                    const int p = fine * l + u * st.stride;
                    const double dx = at(0, k + u) - st.root * table(0, p);
                    const double dy = at(1, k + u) - st.root * table(1, p);
                    c += dx * dx + dy * dy;
                }
                c = base + c * inv_m;
                if (c < best) {
                    best = c;
                    arg = static_cast<std::int8_t>(s);
                }
            }
            energy[static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j)] = best;
            pred[static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j)] = arg;
        }
    }
    DpResult out;
    out.cost = energy[static_cast<std::size_t>(m) * stride + static_cast<std::size_t>(m)];
    int i = m;
    int j = m;
    out.knots.emplace_back(i, j);
    while (i > 0 || j > 0) {
        const std::int8_t s = pred[static_cast<std::size_t>(i) * stride + static_cast<std::size_t>(j)];
        if (s < 0) throw Error(ErrorCode::InvalidArgument, "lattice end point unreachable with this slope set");
        i -= slopes[static_cast<std::size_t>(s)].di;
        j -= slopes[static_cast<std::size_t>(s)].dj;
        out.knots.emplace_back(i, j);
    }
    std::reverse(out.knots.begin(), out.knots.end());
    out.warp = detail::warp_from_knots(out.knots, m);
    return out;
}

namespace detail {

struct AlignState {
    Mat2 rotation = Mat2::Identity();
    double seed = 0.0;
    Warp warp;
    double objective = std::numeric_limits<double>::infinity();
    int rounds = 0;
    bool settled = false;
};

/// Evaluates O (shift(q2, seed), warp) without closure projection, with a
/// single interpolation of q2 so fractional seeds cost no extra smoothing.
inline Field transformed(const Srvf& q2, const AlignState& st) {
    const auto m = q2.size();
    validate_warp(st.warp, m);
    const double md = static_cast<double>(m);
    const double offset = st.seed / md;
    Field out(m, 2);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double prev = i == 0 ? st.warp[m - 1] - 1.0 : st.warp[i - 1];
        const double rate = std::max((st.warp[i + 1] - prev) * 0.5 * md, 0.0);
        out.row(i) = (st.rotation * interpolate(q2.samples, st.warp[i] + offset)).transpose() * std::sqrt(rate);
    }
    return out;
}

/// Further DP / rotation rounds from st (integral seed) until the relative
/// gain drops below round_tol or `rounds` more rounds have run.
inline void extend_rounds(const Srvf& q1, const Srvf& q2, AlignState& st, const RegistrationOptions& opts, int rounds) {
    const Srvf shifted(circular_shift(q2.samples, st.seed), q2.scale);
    for (int r = 0; r < rounds && !st.settled; ++r) {
        const Srvf rotated(rotate(shifted.samples, st.rotation));
        const DpResult dp = dp_match(q1, rotated, opts.slopes);
        const Srvf warped = reparam_action(shifted, dp.warp);
        const Mat2 rot = optimal_rotation(q1, warped).rotation;
        const double obj = matching_cost(q1.samples, rotate(warped.samples, rot));
        ++st.rounds;
        if (!(obj < st.objective)) {
            st.settled = true;
            break;
        }
        const double gain = (st.objective - obj) / std::max(st.objective, 1e-300);
        st.rotation = rot;
        st.warp = dp.warp;
        st.objective = obj;
        if (gain < opts.round_tol) st.settled = true;
    }
}

/// Rigid alignment at an integral seed followed by `rounds` DP / rotation rounds.
inline AlignState align_at_seed(const Srvf& q1, const Srvf& q2, int seed, const RegistrationOptions& opts,
                                int rounds) {
    const Srvf shifted(circular_shift(q2.samples, seed), q2.scale);
    AlignState st;
    st.seed = seed;
    st.rotation = optimal_rotation(q1, shifted).rotation;
    st.warp = identity_warp(q1.size());
    st.objective = matching_cost(q1.samples, rotate(shifted.samples, st.rotation));
    extend_rounds(q1, q2, st, opts, rounds);
    return st;
}

/// Damped Gauss-Newton over (angle, Fourier warp coefficients including a
/// constant seed offset). Starts from st, which must use an integral seed.
inline AlignState refine_continuous(const Srvf& q1, const Srvf& q2, const AlignState& st,
                                    const RegistrationOptions& opts) {
    const auto m = q1.size();
    const int harmonics = std::max(1, opts.harmonics > 0 ? opts.harmonics : static_cast<int>(m / 4));
    const int n_warp = 2 * harmonics + 1;
    const int n_par = n_warp + 1;
    const double md = static_cast<double>(m);

    // basis(i, c): c = 0 constant, then sin/cos pairs
    Eigen::MatrixXd basis(m, n_warp);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double t = static_cast<double>(i) / md;
        basis(i, 0) = 1.0;
        for (int k = 1; k <= harmonics; ++k) {
            basis(i, 2 * k - 1) = std::sin(2.0 * kPi * k * t);
            basis(i, 2 * k) = std::cos(2.0 * kPi * k * t);
        }
    }
    Eigen::MatrixXd dbasis(m, n_warp);
    for (Eigen::Index i = 0; i < m; ++i)
        dbasis.row(i) = (basis.row((i + 1) % m) - basis.row((i + m - 1) % m)) * (0.5 * md);

    const double base_seed = std::round(st.seed);
    const Srvf shifted(circular_shift(q2.samples, base_seed), q2.scale);
    const Field& b = shifted.samples;

    // Initial warp coefficients: Lanczos-damped Fourier fit of the lattice warp.
    Eigen::VectorXd h(m);
    for (Eigen::Index i = 0; i < m; ++i) h[i] = st.warp[i] - static_cast<double>(i) / md;
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(n_warp);
    coef[0] = h.mean();
    for (int k = 1; k <= harmonics; ++k) {
        const double x = kPi * k / (harmonics + 1.0);
        const double sigma = std::sin(x) / x;
        coef[2 * k - 1] = sigma * 2.0 * basis.col(2 * k - 1).dot(h) / md;
        coef[2 * k] = sigma * 2.0 * basis.col(2 * k).dot(h) / md;
    }
    const double angle0 = std::atan2(st.rotation(1, 0), st.rotation(0, 0));
    Eigen::VectorXd par(n_par);
    par[0] = angle0;
    par.tail(n_warp) = coef;

    auto rates_ok = [&](const Eigen::VectorXd& p) {
        const Eigen::VectorXd rate = Eigen::VectorXd::Ones(m) + dbasis * p.tail(n_warp);
        return rate.minCoeff() > 1e-3;
    };
    if (!rates_ok(par)) {
        par.tail(n_warp).setZero();
        par[1] = 0.0;
    }

    auto evaluate = [&](const Eigen::VectorXd& p, Eigen::VectorXd& resid, Eigen::MatrixXd* jac) {
        const Mat2 rot = rotation_matrix(p[0]);
        const Mat2 drot = rotation_matrix(p[0] + 0.5 * kPi);
        const Eigen::VectorXd shift = basis * p.tail(n_warp);
        const Eigen::VectorXd rate = Eigen::VectorXd::Ones(m) + dbasis * p.tail(n_warp);
        resid.resize(2 * m);
        if (jac) jac->setZero(2 * m, n_par);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double x = (static_cast<double>(i) / md + shift[i]) * md;
            const double fl = std::floor(x);
            const double f = x - fl;
            const auto i0 = static_cast<Eigen::Index>(wrap_index(static_cast<long>(fl), static_cast<std::size_t>(m)));
            const Eigen::Index i1 = (i0 + 1) % m;
            const Vec2 val = (1.0 - f) * b.row(i0).transpose() + f * b.row(i1).transpose();
            const Vec2 slope = (b.row(i1) - b.row(i0)).transpose() * md;
            const double root = std::sqrt(rate[i]);
            const Vec2 model = rot * (root * val);
            resid.segment<2>(2 * i) = q1.samples.row(i).transpose() - model;
            if (jac) {
                jac->block<2, 1>(2 * i, 0) = -(drot * (root * val));
                const Vec2 w_rate = rot * (val / (2.0 * root));
                const Vec2 w_pos = rot * (root * slope);
                for (int c = 0; c < n_warp; ++c)
                    jac->block<2, 1>(2 * i, 1 + c) = -(w_rate * dbasis(i, c) + w_pos * basis(i, c));
            }
        }
        return resid.squaredNorm() / md;
    };

    Eigen::VectorXd resid;
    Eigen::MatrixXd jac;
    double cost = evaluate(par, resid, &jac);
    double lambda = 1e-3;
    for (int it = 0; it < opts.refinement_iterations; ++it) {
        const Eigen::MatrixXd jtj = jac.transpose() * jac;
        const Eigen::VectorXd grad = jac.transpose() * resid;
        bool accepted = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd lhs = jtj;
            lhs.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
            const Eigen::VectorXd delta = lhs.ldlt().solve(-grad);
            const Eigen::VectorXd trial = par + delta;
            if (rates_ok(trial)) {
                Eigen::VectorXd r2;
                const double c2 = evaluate(trial, r2, nullptr);
                if (c2 < cost) {
                    const double gain = (cost - c2) / std::max(cost, 1e-300);
                    par = trial;
                    cost = evaluate(par, resid, &jac);
                    lambda = std::max(lambda * 0.3, 1e-9);
                    accepted = true;
                    if (gain < 1e-10) it = opts.refinement_iterations;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if (!accepted) break;
    }

    // Split the constant term off as a fractional seed so the warp stays pinned at 0.
    const Eigen::VectorXd shift = basis * par.tail(n_warp);
    const double offset = shift[0];
    AlignState out;
    out.rotation = rotation_matrix(par[0]);
    out.seed = base_seed + offset * md;
    out.warp.resize(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) out.warp[i] = static_cast<double>(i) / md + shift[i] - offset;
    out.warp[0] = 0.0;
    out.warp[m] = 1.0;
    for (Eigen::Index i = 1; i <= m; ++i) out.warp[i] = std::max(out.warp[i], out.warp[i - 1]);
    out.rounds = st.rounds;
    out.objective = matching_cost(q1.samples, transformed(q2, out));
    return out;
}

inline Registration package(const Srvf& q1, const Srvf& q2, const AlignState& st, bool elastic, bool refined,
                            const ProjectionOptions& proj) {
    Registration reg;
    reg.rotation = st.rotation;
    reg.seed_shift = st.seed;
    reg.warp = st.warp;
    reg.objective = st.objective;
    reg.rounds = st.rounds;
    reg.refined = refined;
    reg.elastic = elastic;
    const Field moved = transformed(q2, st);
    reg.registered_srvf = elastic ? project_closure(moved, proj) : Srvf(moved);
    reg.registered_srvf.scale = q2.scale;
    reg.distance = sphere_distance(q1.samples, reg.registered_srvf.samples);
    return reg;
}

inline double normalized_seed(double seed, Eigen::Index m) {
    const double md = static_cast<double>(m);
    double s = std::fmod(seed, md);
    return s < 0.0 ? s + md : s;
}

} // namespace detail

/// Best rigid correlation max_O <q1, O shift(q2, s)> for every integral seed s.
inline Eigen::VectorXd rigid_correlations(const Srvf& q1, const Srvf& q2) {
    const auto m = q1.size();
    if (q2.size() != m) throw Error(ErrorCode::InvalidArgument, "sample counts differ");
    Eigen::VectorXd out(m);
    const Field& a = q1.samples;
    const Field& b = q2.samples;
    for (Eigen::Index s = 0; s < m; ++s) {
        double trace = 0.0;
        double skew = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::Index j = i + s;
            if (j >= m) j -= m;
            trace += a(i, 0) * b(j, 0) + a(i, 1) * b(j, 1);
            skew += a(i, 1) * b(j, 0) - a(i, 0) * b(j, 1);
        }
        out[s] = std::hypot(trace, skew) / static_cast<double>(m);
    }
    return out;
}

/// Seed and rotation only: every integral seed is tried with its optimal rotation.
inline Registration nonelastic_registration(const Srvf& q1, const Srvf& q2) {
    const Eigen::VectorXd corr = rigid_correlations(q1, q2);
    Eigen::Index seed = 0;
    for (Eigen::Index s = 1; s < corr.size(); ++s)
        if (corr[s] > corr[seed]) seed = s;
    detail::AlignState best;
    best.seed = static_cast<double>(seed);
    const Srvf shifted(circular_shift(q2.samples, best.seed));
    best.rotation = optimal_rotation(q1, shifted).rotation;
    best.warp = identity_warp(q1.size());
    best.objective = detail::matching_cost(q1.samples, rotate(shifted.samples, best.rotation));
    return detail::package(q1, q2, best, false, false, {});
}

/// Full elastic registration of q2 onto q1.
inline Registration optimal_reparam_dp(const Srvf& q1, const Srvf& q2, const RegistrationOptions& opts = {},
                                       const ProjectionOptions& proj = {}) {
    const auto m = static_cast<int>(q1.size());
    if (q2.size() != m) throw Error(ErrorCode::InvalidArgument, "sample counts differ");
    const int stride = opts.seed_stride > 0 ? opts.seed_stride : std::max(1, m / 16);
    if (m % stride != 0) throw Error(ErrorCode::InvalidArgument, "seed stride must divide m");

    std::vector<detail::AlignState> tried;
    auto consider = [&](int seed) {
        seed = static_cast<int>(wrap_index(seed, static_cast<std::size_t>(m)));
        for (const auto& st : tried)
            if (st.seed == seed) return st.objective;
        tried.push_back(detail::align_at_seed(q1, q2, seed, opts, 1));
        return tried.back().objective;
    };
    auto objective_of = [&](int seed) { return consider(seed); };
    for (int s = 0; s < m; s += stride) consider(s);
    // The best rigid seed is always a candidate.
    consider(static_cast<int>(nonelastic_registration(q1, q2).seed_shift));

    std::vector<int> order(tried.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
        return tried[static_cast<std::size_t>(x)].objective < tried[static_cast<std::size_t>(y)].objective;
    });
    order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(std::max(1, opts.refine_candidates))));
    std::vector<int> finalists;
    for (int idx : order) {
        int centre = static_cast<int>(tried[static_cast<std::size_t>(idx)].seed);
        if (opts.refine_seed && stride > 1) {
            // Halving local search: a basin can sit between coarse grid points.
            double obj = objective_of(centre);
            for (int step = stride / 2; step >= 1; step /= 2) {
                const double lo = objective_of(centre - step);
                const double hi = objective_of(centre + step);
                if (lo < obj && lo <= hi) {
                    centre = static_cast<int>(wrap_index(centre - step, static_cast<std::size_t>(m)));
                    obj = lo;
                } else if (hi < obj) {
                    centre = static_cast<int>(wrap_index(centre + step, static_cast<std::size_t>(m)));
                    obj = hi;
                }
            }
        }
        if (std::find(finalists.begin(), finalists.end(), centre) == finalists.end()) finalists.push_back(centre);
    }

    // The one-round objective ranks basins poorly, so every finalist is carried
    // through the remaining rounds and the polish before choosing.
    detail::AlignState st;
    bool refined = false;
    for (int seed : finalists) {
        detail::AlignState cand;
        for (const auto& t : tried)
            if (t.seed == seed) cand = t;
        detail::extend_rounds(q1, q2, cand, opts, opts.max_rounds - 1);
        bool cand_refined = false;
        if (opts.continuous_refinement) {
            detail::AlignState polished = detail::refine_continuous(q1, q2, cand, opts);
            if (polished.objective < cand.objective) {
                cand = std::move(polished);
                cand_refined = true;
            }
        }
        if (cand.objective < st.objective) {
            st = std::move(cand);
            refined = cand_refined;
        }
    }
    st.seed = detail::normalized_seed(st.seed, m);
    return detail::package(q1, q2, st, true, refined, proj);
}

/// Continuous refinement started from an existing registration of q2 (warm start).
inline Registration refine_registration(const Srvf& q1, const Srvf& q2, const Registration& start,
                                        const RegistrationOptions& opts = {}, const ProjectionOptions& proj = {}) {
    const auto m = q1.size();
    detail::AlignState exact;
    exact.rotation = start.rotation;
    exact.seed = start.seed_shift;
    exact.warp = start.warp.size() == m + 1 ? start.warp : identity_warp(m);
    exact.objective = detail::matching_cost(q1.samples, detail::transformed(q2, exact));
    // The polisher starts from an integral seed; the fractional part moves into the warp offset.
    detail::AlignState integral = exact;
    integral.seed = std::round(exact.seed);
    integral.warp.array() += (exact.seed - integral.seed) / static_cast<double>(m);
    detail::AlignState polished = detail::refine_continuous(q1, q2, integral, opts);
    const bool better = polished.objective < exact.objective;
    detail::AlignState& chosen = better ? polished : exact;
    chosen.seed = detail::normalized_seed(chosen.seed, m);
    return detail::package(q1, q2, chosen, true, better, proj);
}

namespace detail {

inline void take_if_shorter(ShapeDistance& out, const Srvf& q1, Registration reg, const GeodesicOptions& gopt,
                            double* slot) {
    GeodesicPath path = geodesic(q1, reg.registered_srvf, gopt);
    *slot = path.length;
    if (path.length < out.distance) {
        out.distance = path.length;
        reg.distance = path.length;
        out.registration = std::move(reg);
        out.path = std::move(path);
    }
}

inline Registration identity_registration(const Srvf& q1, const Srvf& q2) {
    AlignState st;
    st.warp = identity_warp(q1.size());
    st.objective = matching_cost(q1.samples, q2.samples);
    return package(q1, q2, st, false, false, {});
}

} // namespace detail

/// Nonelastic shape distance: seed and rotation only, never above the
/// unregistered pre-shape distance.
inline ShapeDistance nonelastic_distance(const Srvf& q1, const Srvf& q2, const DistanceOptions& opts = {}) {
    ShapeDistance out;
    out.distance = std::numeric_limits<double>::infinity();
    detail::take_if_shorter(out, q1, detail::identity_registration(q1, q2), opts.geodesic, &out.identity_candidate);
    detail::take_if_shorter(out, q1, nonelastic_registration(q1, q2), opts.geodesic, &out.nonelastic_candidate);
    out.elastic_candidate = out.distance;
    return out;
}

/// Elastic shape distance: the smallest pre-shape geodesic length among the
/// elastic, nonelastic and unregistered candidates.
inline ShapeDistance distance_shape(const Srvf& q1, const Srvf& q2, const DistanceOptions& opts = {}) {
    ShapeDistance out = nonelastic_distance(q1, q2, opts);
    detail::take_if_shorter(out, q1, optimal_reparam_dp(q1, q2, opts.registration, opts.geodesic.projection),
                            opts.geodesic, &out.elastic_candidate);
    return out;
}

/// Elastic distance starting from a known registration; only the continuous
/// refinement is run.
inline ShapeDistance distance_shape_warm(const Srvf& q1, const Srvf& q2, const Registration& start,
                                         const DistanceOptions& opts = {}) {
    ShapeDistance out;
    out.distance = std::numeric_limits<double>::infinity();
    detail::take_if_shorter(out, q1, detail::identity_registration(q1, q2), opts.geodesic, &out.identity_candidate);
    out.nonelastic_candidate = out.identity_candidate;
    detail::take_if_shorter(out, q1, refine_registration(q1, q2, start, opts.registration, opts.geodesic.projection),
                            opts.geodesic, &out.elastic_candidate);
    return out;
}

inline double distance_nonelastic(const Srvf& q1, const Srvf& q2, const DistanceOptions& opts = {}) {
    return nonelastic_distance(q1, q2, opts).distance;
}

inline ShapeDistance distance(const Srvf& q1, const Srvf& q2, DistanceMode mode, const DistanceOptions& opts = {}) {
    return mode == DistanceMode::Elastic ? distance_shape(q1, q2, opts) : nonelastic_distance(q1, q2, opts);
}

/// Tangent fields spanning the rotation and reparameterisation orbit at q:
/// J q and h q' + h' q / 2 for h in a Fourier basis up to `harmonics`.
inline std::vector<Field> orbit_directions(const Srvf& q, int harmonics) {
    const auto m = q.size();
    const Field dq = periodic_derivative(q.samples);
    std::vector<Field> dirs;
    Field rot(m, 2);
    rot.col(0) = -q.samples.col(1);
    rot.col(1) = q.samples.col(0);
    dirs.push_back(rot);
    for (int k = 0; k <= harmonics; ++k) {
        for (int phase = 0; phase < (k == 0 ? 1 : 2); ++phase) {
            Field d(m, 2);
            for (Eigen::Index i = 0; i < m; ++i) {
                const double w = 2.0 * kPi * k;
                const double t = static_cast<double>(i) / static_cast<double>(m);
                const double h = k == 0 ? 1.0 : (phase == 0 ? std::sin(w * t) : std::cos(w * t));
                const double dh = k == 0 ? 0.0 : (phase == 0 ? w * std::cos(w * t) : -w * std::sin(w * t));
                d.row(i) = h * dq.row(i) + 0.5 * dh * q.samples.row(i);
            }
            dirs.push_back(d);
        }
    }
    return dirs;
}

/// L2-orthonormal basis of the orbit directions after tangent projection.
inline std::vector<Field> orbit_basis(const Srvf& q, int harmonics) {
    std::vector<Field> basis;
    for (const auto& d : orbit_directions(q, harmonics)) {
        Field f = project_tangent(q, d).samples;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& e : basis) f -= inner(f, e) * e;
        const double n = norm(f);
        if (n > 1e-8) basis.push_back(f / n);
    }
    return basis;
}

/// Component of v orthogonal to the given orbit basis.
inline TangentVector horizontal_part(const std::vector<Field>& basis, const TangentVector& v) {
    Field out = v.samples;
    for (const auto& e : basis) out -= inner(out, e) * e;
    return TangentVector(std::move(out), v.base_id);
}

struct DistanceMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> ids;
    DistanceMode mode = DistanceMode::Elastic;
    /// max |D(i,j) - D(j,i)| before symmetrisation.
    double max_asymmetry = 0.0;
};

/// All ordered pairs are computed, then symmetrised as (D + D^T)/2. Any
/// failed pair rejects the matrix with the failing ids listed.
inline DistanceMatrix pairwise_distance_matrix(const ShapeEnsemble& ensemble, DistanceMode mode,
                                               const DistanceOptions& opts = {}, int threads = 0) {
    ensemble.validate();
    const std::size_t n = ensemble.size();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "distance matrix needs at least two shapes");
    Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<std::string> failures(n * n);
    parallel_for(
        n * n,
        [&](std::size_t k) {
            const std::size_t i = k / n;
            const std::size_t j = k % n;
            if (i == j) return;
            try {
                raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    distance(ensemble.shapes[i], ensemble.shapes[j], mode, opts).distance;
            } catch (const Error& e) {
                failures[k] = ensemble.ids[i] + "/" + ensemble.ids[j] + ": " + e.what();
            }
        },
        threads);
    std::string missing;
    for (const auto& f : failures)
        if (!f.empty()) missing += (missing.empty() ? "" : "; ") + f;
    if (!missing.empty()) throw Error(ErrorCode::InvalidDistanceMatrix, "missing entries: " + missing);

    DistanceMatrix out;
    out.ids = ensemble.ids;
    out.mode = mode;
    out.max_asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
    out.values = 0.5 * (raw + raw.transpose());
    return out;
}

} // namespace elastic
