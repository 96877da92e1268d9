#pragma once

// Population statistics on the shape space: Karcher mean, tangent PCA,
// simulation from the fitted wrapped-normal model and leave-one-out
// reconstruction error.

#include "elastic/core.hpp"
#include "elastic/ensemble.hpp"
#include "elastic/parallel.hpp"
#include "elastic/preshape.hpp"
#include "elastic/registration.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace elastic {

struct KarcherOptions {
    double step = 0.5;
    double tolerance = 1e-4;
    int max_iterations = 100;
    /// Iterations that run the full seed search; later ones warm-start from the previous registration.
    int full_registration_iterations = 2;
    double variance_slack = 1e-6;
    /// Shooting vectors are stripped of their components along the mean's
    /// orbit (rotation, warps up to this many harmonics). 0 selects m/4, matching the registration warp space; negative disables.
    int horizontal_harmonics = 0;
    /// Re-register every shape from scratch at the final mean and keep the better fit.
    bool final_full_registration = true;
    /// Descent restarts allowed when that fresh pass finds better registrations.
    int max_restarts = 3;
    DistanceOptions distance{};
    ExpOptions exp{};
    int threads = 0;
};

struct KarcherResult {
    Srvf mean;
    ShapeEnsemble registered;
    std::vector<TangentVector> shooting;
    std::vector<Registration> registrations;
    std::vector<double> distances;
    /// Sum of squared shape distances to the mean, one entry per evaluated mean.
    std::vector<double> variance_history;
    std::size_t medoid = 0;
    int iterations = 0;
    bool converged = false;
    double last_update = 0.0;

    double variance() const { return variance_history.empty() ? 0.0 : variance_history.back(); }
};

struct SpcaModel {
    Srvf mean;
    std::vector<TangentVector> shooting_vectors;
    /// Retained eigenvalues, descending. Directions below a round-off floor are dropped.
    Eigen::VectorXd eigenvalues;
    /// L2-orthonormal tangent fields, one per retained eigenvalue.
    std::vector<TangentVector> eigenvectors;
    /// n x r coefficient matrix C(i, j) = <v_i, u_j>.
    Eigen::MatrixXd coefficients;
    double total_variance = 0.0;
    /// Eigenvalues that exceed what the residual mean tangent alone can produce; at most n - 1.
    int positive_count = 0;
    std::vector<std::string> ids;

    int rank() const { return static_cast<int>(eigenvalues.size()); }
};

struct ReconstructionReport {
    std::vector<std::string> ids;
    std::vector<double> per_shape_error;
    double mean = 0.0;
    double std = 0.0;
    double median = 0.0;
    double median_absolute_deviation = 0.0;
    /// Registered held-out shape and its reconstruction, both at the training mean.
    std::vector<Srvf> truth;
    std::vector<Srvf> reconstruction;
};

namespace detail {

inline Srvf oriented_like(const Srvf& q, double scale) {
    Srvf out = q;
    out.scale = scale;
    return out;
}

/// Squared rigid sphere distances, a cheap surrogate of d_S^2 for medoid selection.
inline std::size_t surrogate_medoid(const ShapeEnsemble& e, int threads) {
    const std::size_t n = e.size();
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for(
        n * n,
        [&](std::size_t k) {
            const std::size_t i = k / n;
            const std::size_t j = k % n;
            if (j <= i) return;
            const double c = std::clamp(rigid_correlations(e.shapes[i], e.shapes[j]).maxCoeff(), -1.0, 1.0);
            const double d = std::acos(c);
            d2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d * d;
        },
        threads);
    const Eigen::MatrixXd full = d2 + d2.transpose();
    Eigen::Index best = 0;
    full.rowwise().sum().minCoeff(&best);
    return static_cast<std::size_t>(best);
}

struct Registered {
    std::vector<ShapeDistance> fits;
    double variance = 0.0;
};

inline Registered register_all(const Srvf& mean, const ShapeEnsemble& e, const std::vector<Registration>* warm,
                               const DistanceOptions& opts, int threads) {
    Registered r;
    r.fits.resize(e.size());
    parallel_for(
        e.size(),
        [&](std::size_t i) {
            r.fits[i] = warm ? distance_shape_warm(mean, e.shapes[i], (*warm)[i], opts)
                             : distance_shape(mean, e.shapes[i], opts);
        },
        threads);
    for (const auto& f : r.fits) r.variance += f.distance * f.distance;
    return r;
}

inline std::vector<Field> horizontal_basis(const Srvf& mean, const KarcherOptions& opts) {
    if (opts.horizontal_harmonics < 0) return {};
    const int h = opts.horizontal_harmonics > 0 ? opts.horizontal_harmonics : static_cast<int>(mean.size() / 4);
    return orbit_basis(mean, h);
}

inline Field mean_tangent(const std::vector<ShapeDistance>& fits, Eigen::Index m) {
    Field v = Field::Zero(m, 2);
    for (const auto& f : fits) v += shooting_vector(f.path).samples;
    return v / static_cast<double>(fits.size());
}

} // namespace detail

/// Gradient descent for the Karcher mean under d_S, started at the medoid
/// unless an initial mean is supplied. Non-convergence is reported through
/// `converged`, not thrown.
inline KarcherResult karcher_mean(const ShapeEnsemble& ensemble, const KarcherOptions& opts = {},
                                  const Srvf* initial = nullptr,
                                  const std::vector<Registration>* warm_start = nullptr) {
    ensemble.validate();
    const std::size_t n = ensemble.size();
    const auto m = ensemble.m();
    KarcherResult out;
    if (n == 1 && !initial) {
        out.mean = ensemble.shapes[0];
        out.registered = ensemble;
        out.shooting = {TangentVector(Field::Zero(m, 2), ensemble.ids[0])};
        Registration self;
        self.warp = identity_warp(m);
        self.registered_srvf = ensemble.shapes[0];
        out.registrations = {self};
        out.distances = {0.0};
        out.variance_history = {0.0};
        out.converged = true;
        return out;
    }

    Srvf mean;
    if (initial) {
        mean = *initial;
    } else {
        out.medoid = detail::surrogate_medoid(ensemble, opts.threads);
        mean = ensemble.shapes[out.medoid];
    }

    Srvf previous_mean = mean;
    Field previous_step = Field::Zero(m, 2);
    double step = opts.step;
    double previous_variance = std::numeric_limits<double>::infinity();
    std::vector<Registration> warm;
    if (warm_start) {
        if (warm_start->size() != n) throw Error(ErrorCode::InvalidArgument, "one warm-start registration per shape required");
        warm = *warm_start;
    }
    detail::Registered current;
    int iteration = 0;
    bool converged = false;
    bool restarted = false;
    const auto descend = [&] {
        converged = false;
        for (; iteration < opts.max_iterations; ++iteration) {
            const bool full =
                !restarted && (warm.empty() || (iteration < opts.full_registration_iterations && !initial && !warm_start));
            current = detail::register_all(mean, ensemble, full ? nullptr : &warm, opts.distance, opts.threads);
            if (current.variance > previous_variance + opts.variance_slack && step > 1e-3) {
                // Overshoot: retry a shorter step from the previous mean.
                step *= 0.5;
                mean = exp_map(previous_mean, TangentVector(previous_step * 0.5), opts.exp);
                previous_step *= 0.5;
                continue;
            }
            out.variance_history.push_back(current.variance);
            warm.clear();
            for (const auto& f : current.fits) warm.push_back(f.registration);
            const Field vbar = horizontal_part(detail::horizontal_basis(mean, opts),
                                               TangentVector(detail::mean_tangent(current.fits, m)))
                                   .samples;
            out.last_update = step * norm(vbar);
            if (out.last_update < opts.tolerance) {
                converged = true;
                return;
            }
            previous_mean = mean;
            previous_variance = current.variance;
            previous_step = step * vbar;
            mean = exp_map(mean, TangentVector(previous_step), opts.exp);
        }
    };

    // Final registrations at the returned mean: best of a fresh search and the
    // warm start. A strictly better fresh optimum moves the tangent mean, so the
    // descent resumes from the merged registrations.
    detail::Registered fresh;
    for (int restart = 0;; ++restart) {
        descend();
        const bool stale = !converged || current.fits.empty();
        if (!opts.final_full_registration && !stale) {
            fresh = std::move(current);
            break;
        }
        fresh = detail::register_all(mean, ensemble, stale && !opts.final_full_registration ? &warm : nullptr,
                                     opts.distance, opts.threads);
        bool improved = false;
        if (!stale)
            for (std::size_t i = 0; i < n; ++i) {
                if (current.fits[i].distance <= fresh.fits[i].distance)
                    fresh.fits[i] = std::move(current.fits[i]);
                else if (current.fits[i].distance - fresh.fits[i].distance > opts.variance_slack)
                    improved = true;
            }
        if (!improved || restart >= opts.max_restarts || iteration >= opts.max_iterations) break;
        warm.clear();
        for (const auto& f : fresh.fits) warm.push_back(f.registration);
        previous_variance = std::numeric_limits<double>::infinity();
        step = opts.step;
        restarted = true;
    }
    out.iterations = iteration;
    out.converged = converged;

    fresh.variance = 0.0;
    for (const auto& f : fresh.fits) fresh.variance += f.distance * f.distance;
    if (out.variance_history.empty() || fresh.variance < out.variance_history.back())
        out.variance_history.push_back(fresh.variance);

    out.mean = mean;
    out.mean.scale = 1.0;
    const auto basis = detail::horizontal_basis(mean, opts);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = fresh.fits[i];
        out.registrations.push_back(f.registration);
        out.distances.push_back(f.distance);
        out.shooting.push_back(horizontal_part(basis, TangentVector(shooting_vector(f.path).samples, ensemble.ids[i])));
        out.registered.add(detail::oriented_like(f.registration.registered_srvf, ensemble.shapes[i].scale),
                           ensemble.ids[i], ensemble.covariates.empty() ? Covariates{} : ensemble.covariates[i]);
    }
    return out;
}

/// Uncentred tangent covariance K = V V^T / (n - 1) under the L2 inner
/// product, diagonalised through the n x n Gram matrix.
inline SpcaModel covariance_and_spca(const Srvf& mean, const std::vector<TangentVector>& shooting) {
    const std::size_t n = shooting.size();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "covariance needs at least two shooting vectors");
    const auto nn = static_cast<Eigen::Index>(n);
    const double denom = static_cast<double>(n - 1);
    Eigen::MatrixXd gram(nn, nn);
    for (Eigen::Index i = 0; i < nn; ++i)
        for (Eigen::Index j = i; j < nn; ++j)
            gram(i, j) = gram(j, i) = inner(shooting[static_cast<std::size_t>(i)].samples,
                                             shooting[static_cast<std::size_t>(j)].samples) / denom;

    SpcaModel model;
    model.mean = mean;
    model.shooting_vectors = shooting;
    for (const auto& v : shooting) model.ids.push_back(v.base_id);
    model.total_variance = gram.trace();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::VectorXd values = eig.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double floor = 1e-14 * std::max(model.total_variance, 0.0);

    Field vbar = Field::Zero(mean.size(), 2);
    for (const auto& v : shooting) vbar += v.samples;
    vbar /= static_cast<double>(n);
    // Weyl: the uncentred K exceeds the centred one only by n/(n-1) vbar vbar^T.
    const double mean_floor = static_cast<double>(n) / denom * inner(vbar, vbar) * (1.0 + 1e-8) + floor;

    std::vector<double> kept;
    for (Eigen::Index j = 0; j < nn; ++j) {
        if (!(values[j] > floor) || !(model.total_variance > 0.0)) break;
        Field u = Field::Zero(mean.size(), 2);
        for (Eigen::Index i = 0; i < nn; ++i) u += vectors(i, j) * shooting[static_cast<std::size_t>(i)].samples;
        const double un = norm(u);
        if (!(un > 0.0)) break;
        // Re-orthogonalise against earlier directions to hold orthonormality near degeneracy.
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& e : model.eigenvectors) u -= inner(u, e.samples) * e.samples;
        u /= norm(u);
        model.eigenvectors.emplace_back(std::move(u), "pc" + std::to_string(j + 1));
        kept.push_back(values[j]);
        if (values[j] > mean_floor) ++model.positive_count;
    }
    model.eigenvalues = Eigen::Map<Eigen::VectorXd>(kept.data(), static_cast<Eigen::Index>(kept.size()));
    model.coefficients.resize(nn, model.rank());
    for (Eigen::Index i = 0; i < nn; ++i)
        for (int j = 0; j < model.rank(); ++j)
            model.coefficients(i, j) = inner(shooting[static_cast<std::size_t>(i)].samples,
                                             model.eigenvectors[static_cast<std::size_t>(j)].samples);
    return model;
}

/// Orthogonal projection onto the span of the top-r principal directions.
inline TangentVector reconstruct_tangent(const SpcaModel& model, const TangentVector& v, int r) {
    if (r < 0 || r > model.rank()) throw Error(ErrorCode::InvalidArgument, "r exceeds the retained directions");
    Field out = Field::Zero(v.size(), 2);
    for (int j = 0; j < r; ++j) {
        const Field& u = model.eigenvectors[static_cast<std::size_t>(j)].samples;
        out += inner(v.samples, u) * u;
    }
    return TangentVector(std::move(out), v.base_id);
}

/// exp_{mean}(sum_{j<kappa} sqrt(sigma_j) Z_j u_j) with Z_j iid N(0,1) from a seeded generator.
inline Srvf random_shape(const SpcaModel& model, std::uint64_t rng_seed, int kappa, const ExpOptions& opts = {}) {
    if (kappa < 0 || kappa > model.rank()) throw Error(ErrorCode::InvalidArgument, "kappa exceeds the retained directions");
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Field s = Field::Zero(model.mean.size(), 2);
    for (int j = 0; j < kappa; ++j) {
        const double draw = z(rng);
        s += std::sqrt(std::max(model.eigenvalues[j], 0.0)) * draw * model.eigenvectors[static_cast<std::size_t>(j)].samples;
    }
    return exp_map(model.mean, TangentVector(std::move(s)), opts);
}

/// Shapes exp_{mean}(t sqrt(sigma_j) u_j) for each t; j is zero-based.
inline std::vector<Srvf> principal_direction_path(const SpcaModel& model, int j, const std::vector<double>& t_values,
                                                  const ExpOptions& opts = {}) {
    if (j < 0 || j >= model.rank()) throw Error(ErrorCode::InvalidArgument, "direction index out of range");
    const Field& u = model.eigenvectors[static_cast<std::size_t>(j)].samples;
    const double sd = std::sqrt(std::max(model.eigenvalues[j], 0.0));
    std::vector<Srvf> out;
    out.reserve(t_values.size());
    for (double t : t_values) out.push_back(t == 0.0 ? model.mean : exp_map(model.mean, TangentVector(t * sd * u), opts));
    return out;
}

namespace detail {

inline double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

} // namespace detail

/// Summary statistics (mean, sample std, median, unscaled MAD) of the errors.
inline void summarize(ReconstructionReport& r) {
    const auto& e = r.per_shape_error;
    if (e.empty()) return;
    r.mean = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    double ss = 0.0;
    for (double x : e) ss += (x - r.mean) * (x - r.mean);
    r.std = e.size() > 1 ? std::sqrt(ss / static_cast<double>(e.size() - 1)) : 0.0;
    r.median = detail::median_of(e);
    std::vector<double> dev;
    for (double x : e) dev.push_back(std::abs(x - r.median));
    r.median_absolute_deviation = detail::median_of(dev);
}

struct LooOptions {
    KarcherOptions karcher{};
    /// Basis size; negative selects n - 2 (capped by the training model's positive count).
    int directions = -1;
};

/// Leave-one-out reconstruction error E(i) = ||v_i - v~_i||^2 with the
/// held-out shape registered to the mean of the other n - 1 shapes. When a
/// full-data fit is given, each training mean starts from its mean and
/// registrations.
inline ReconstructionReport loo_reconstruction(const ShapeEnsemble& ensemble, const LooOptions& opts = {},
                                               const KarcherResult* full = nullptr) {
    ensemble.validate();
    const std::size_t n = ensemble.size();
    if (n < 3) throw Error(ErrorCode::InvalidArgument, "leave-one-out needs at least three shapes");
    ReconstructionReport report;
    report.ids = ensemble.ids;
    report.per_shape_error.assign(n, 0.0);
    report.truth.resize(n);
    report.reconstruction.resize(n);
    std::vector<std::string> failures(n);

    if (full && full->registrations.size() != n) throw Error(ErrorCode::InvalidArgument, "full fit does not match the ensemble");
    KarcherOptions inner_opts = opts.karcher;
    inner_opts.threads = 1;
    if (full) inner_opts.final_full_registration = false;
    parallel_for(
        n,
        [&](std::size_t i) {
            try {
                std::vector<std::size_t> keep;
                for (std::size_t j = 0; j < n; ++j)
                    if (j != i) keep.push_back(j);
                const ShapeEnsemble training = ensemble.subset(keep);
                std::vector<Registration> warm;
                if (full)
                    for (std::size_t j : keep) warm.push_back(full->registrations[j]);
                const KarcherResult fit =
                    karcher_mean(training, inner_opts, full ? &full->mean : nullptr, full ? &warm : nullptr);
                const SpcaModel model = covariance_and_spca(fit.mean, fit.shooting);
                const ShapeDistance held = distance_shape(fit.mean, ensemble.shapes[i], inner_opts.distance);
                const TangentVector v =
                    horizontal_part(detail::horizontal_basis(fit.mean, inner_opts), shooting_vector(held.path));
                int r = opts.directions >= 0 ? opts.directions : static_cast<int>(n) - 2;
                r = std::min(r, model.positive_count);
                const TangentVector approx = reconstruct_tangent(model, v, r);
                report.per_shape_error[i] = inner(v.samples - approx.samples, v.samples - approx.samples);
                report.truth[i] = held.registration.registered_srvf;
                report.reconstruction[i] = exp_map(fit.mean, approx, inner_opts.exp);
            } catch (const Error& e) {
                failures[i] = ensemble.ids[i] + ": " + e.what();
            }
        },
        opts.karcher.threads);
    std::string missing;
    for (const auto& f : failures)
        if (!f.empty()) missing += (missing.empty() ? "" : "; ") + f;
    if (!missing.empty()) throw Error(ErrorCode::MeanNotConverged, "leave-one-out failed for " + missing);
    summarize(report);
    return report;
}

} // namespace elastic
