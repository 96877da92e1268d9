#pragma once

// Distance-based inference: complete-linkage clustering, classical MDS,
// a permutation test on group Karcher means and Bayesian cluster enrichment.

#include "elastic/core.hpp"
#include "elastic/ensemble.hpp"
#include "elastic/parallel.hpp"
#include "elastic/registration.hpp"
#include "elastic/shapestats.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace elastic {

struct Merge {
    /// Cluster ids: 0..n-1 are singletons, n + s is the cluster formed at step s.
    int a = 0;
    int b = 0;
    double height = 0.0;
    int size = 0;
};

struct ClusterAssignment {
    /// Labels 1..k, numbered by the smallest member index of each cluster.
    std::vector<int> labels;
    int k = 0;
    std::string linkage = "complete";
    std::vector<double> merge_heights;
    std::vector<Merge> merges;
};

struct MdsResult {
    Eigen::MatrixXd coordinates;
    /// All eigenvalues of the double-centred matrix, descending.
    Eigen::VectorXd eigenvalues;
    /// Share of absolute eigenvalue mass that is negative (0 for Euclidean D).
    double negative_mass = 0.0;
};

inline void validate_distance_matrix(const Eigen::MatrixXd& d) {
    if (d.rows() != d.cols() || d.rows() == 0) throw Error(ErrorCode::InvalidDistanceMatrix, "matrix must be square and non-empty");
    if (!d.allFinite()) throw Error(ErrorCode::InvalidDistanceMatrix, "non-finite entry");
    const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        if (std::abs(d(i, i)) > 1e-12 * scale) throw Error(ErrorCode::InvalidDistanceMatrix, "nonzero diagonal");
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            if (d(i, j) < 0.0) throw Error(ErrorCode::InvalidDistanceMatrix, "negative entry");
            if (std::abs(d(i, j) - d(j, i)) > 1e-9 * scale) throw Error(ErrorCode::InvalidDistanceMatrix, "matrix is not symmetric");
        }
    }
}

/// Agglomerative complete linkage. Ties merge the lexicographically smallest
/// pair of active cluster ids.
inline ClusterAssignment hierarchical_cluster(const Eigen::MatrixXd& d, int k) {
    validate_distance_matrix(d);
    const int n = static_cast<int>(d.rows());
    if (k < 1 || k > n) throw Error(ErrorCode::InvalidArgument, "cluster count must lie in [1, n]");

    // Linkage distances between active clusters, indexed by slot; slot i holds cluster id[i].
    Eigen::MatrixXd link = d;
    std::vector<int> id(static_cast<std::size_t>(n));
    std::iota(id.begin(), id.end(), 0);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};
    std::vector<bool> active(static_cast<std::size_t>(n), true);

    ClusterAssignment out;
    out.k = k;
    std::vector<std::vector<int>> at_cut;
    for (int step = 0; step < n - 1; ++step) {
        if (n - step == k) at_cut = members;
        double best = std::numeric_limits<double>::infinity();
        int bi = -1;
        int bj = -1;
        for (int i = 0; i < n; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (int j = 0; j < n; ++j) {
                if (j == i || !active[static_cast<std::size_t>(j)]) continue;
                const int lo = std::min(id[static_cast<std::size_t>(i)], id[static_cast<std::size_t>(j)]);
                const int hi = std::max(id[static_cast<std::size_t>(i)], id[static_cast<std::size_t>(j)]);
                const double v = link(i, j);
                bool take = v < best;
                if (!take && v == best && bi >= 0) {
                    const int blo = std::min(id[static_cast<std::size_t>(bi)], id[static_cast<std::size_t>(bj)]);
                    const int bhi = std::max(id[static_cast<std::size_t>(bi)], id[static_cast<std::size_t>(bj)]);
                    take = std::pair(lo, hi) < std::pair(blo, bhi);
                }
                if (take) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        if (id[static_cast<std::size_t>(bi)] > id[static_cast<std::size_t>(bj)]) std::swap(bi, bj);
        auto& keep = members[static_cast<std::size_t>(bi)];
        auto& gone = members[static_cast<std::size_t>(bj)];
        Merge mg{id[static_cast<std::size_t>(bi)], id[static_cast<std::size_t>(bj)], best,
                 static_cast<int>(keep.size() + gone.size())};
        keep.insert(keep.end(), gone.begin(), gone.end());
        gone.clear();
        active[static_cast<std::size_t>(bj)] = false;
        for (int t = 0; t < n; ++t)
            if (active[static_cast<std::size_t>(t)] && t != bi) link(bi, t) = link(t, bi) = std::max(link(bi, t), link(bj, t));
        id[static_cast<std::size_t>(bi)] = n + step;
        out.merges.push_back(mg);
        out.merge_heights.push_back(best);
    }
    if (k == 1 || n == 1) at_cut = members;

    std::vector<std::vector<int>> groups;
    for (auto& g : at_cut)
        if (!g.empty()) {
            std::sort(g.begin(), g.end());
            groups.push_back(g);
        }
    std::sort(groups.begin(), groups.end(), [](const auto& x, const auto& y) { return x.front() < y.front(); });
    out.labels.assign(static_cast<std::size_t>(n), 0);
    for (std::size_t c = 0; c < groups.size(); ++c)
        for (int i : groups[c]) out.labels[static_cast<std::size_t>(i)] = static_cast<int>(c) + 1;
    return out;
}

/// Classical (Torgerson) scaling; negative eigenvalues contribute zero-length axes.
inline MdsResult classical_mds(const Eigen::MatrixXd& d, int dims) {
    validate_distance_matrix(d);
    if (dims < 1) throw Error(ErrorCode::InvalidArgument, "dims must be positive");
    const auto n = d.rows();
    const Eigen::MatrixXd j = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
    const Eigen::MatrixXd b = -0.5 * j * d.cwiseProduct(d) * j;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (b + b.transpose()));
    MdsResult out;
    out.eigenvalues = eig.eigenvalues().reverse();
    const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
    const double total = out.eigenvalues.cwiseAbs().sum();
    double negative = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        if (out.eigenvalues[i] < 0.0) negative += -out.eigenvalues[i];
    out.negative_mass = total > 0.0 ? negative / total : 0.0;
    out.coordinates = Eigen::MatrixXd::Zero(n, dims);
    for (Eigen::Index c = 0; c < std::min<Eigen::Index>(dims, n); ++c) {
        Eigen::VectorXd axis = vectors.col(c) * std::sqrt(std::max(out.eigenvalues[c], 0.0));
        // Sign convention: the largest-magnitude entry is positive.
        Eigen::Index arg = 0;
        axis.cwiseAbs().maxCoeff(&arg);
        if (axis[arg] < 0.0) axis = -axis;
        out.coordinates.col(c) = axis;
    }
    return out;
}

struct PermutationOptions {
    int permutations = 1000;
    std::uint64_t rng_seed = 0;
    KarcherOptions karcher{};
    int threads = 0;
};

struct PermutationTestResult {
    double observed_statistic = 0.0;
    std::vector<double> permutation_statistics;
    double p_value = 1.0;
    int permutations = 0;
    std::uint64_t rng_seed = 0;
    std::size_t group_sizes[2] = {0, 0};
    bool pooled_mean_converged = true;
};

namespace detail {

/// Group mean exp_{mu}(average shooting vector of the members).
inline Srvf tangent_group_mean(const Srvf& mu, const std::vector<TangentVector>& v, const std::vector<int>& labels,
                               int group, const ExpOptions& opts) {
    Field sum = Field::Zero(mu.size(), 2);
    std::size_t count = 0;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (labels[i] == group) {
            sum += v[i].samples;
            ++count;
        }
    return exp_map(mu, TangentVector(sum / static_cast<double>(count)), opts);
}

inline double group_distance(const Srvf& mu, const std::vector<TangentVector>& v, const std::vector<int>& labels,
                             const KarcherOptions& opts) {
    const Srvf a = tangent_group_mean(mu, v, labels, 0, opts.exp);
    const Srvf b = tangent_group_mean(mu, v, labels, 1, opts.exp);
    Registration start;
    start.warp = identity_warp(mu.size());
    return distance_shape_warm(a, b, start, opts.distance).distance;
}

} // namespace detail

/// Two-sample permutation test with statistic d_S between the group means.
/// All shapes are registered once to the pooled Karcher mean; each group mean
/// is the exponential of its members' average shooting vector there, so
/// observed and permuted statistics are computed identically.
inline PermutationTestResult permutation_test_mean_shape(const ShapeEnsemble& ensemble, const std::vector<int>& labels,
                                                         const PermutationOptions& opts = {}) {
    ensemble.validate();
    if (labels.size() != ensemble.size()) throw Error(ErrorCode::InvalidArgument, "one label per shape required");
    PermutationTestResult out;
    for (int l : labels) {
        if (l != 0 && l != 1) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
        ++out.group_sizes[l];
    }
    if (out.group_sizes[0] < 2 || out.group_sizes[1] < 2)
        throw Error(ErrorCode::GroupTooSmall, "each group needs at least two shapes");
    if (opts.permutations < 1) throw Error(ErrorCode::InvalidArgument, "permutation count must be positive");

    const KarcherResult pooled = karcher_mean(ensemble, opts.karcher);
    out.pooled_mean_converged = pooled.converged;
    out.permutations = opts.permutations;
    out.rng_seed = opts.rng_seed;
    out.observed_statistic = detail::group_distance(pooled.mean, pooled.shooting, labels, opts.karcher);

    out.permutation_statistics.assign(static_cast<std::size_t>(opts.permutations), 0.0);
    KarcherOptions inner_opts = opts.karcher;
    inner_opts.threads = 1;
    parallel_for(
        static_cast<std::size_t>(opts.permutations),
        [&](std::size_t b) {
            std::mt19937_64 rng(derive_seed(opts.rng_seed, b));
            std::vector<int> perm = labels;
            // Fisher-Yates with explicit draws so the permutation stream is fixed by the seed alone.
            for (std::size_t i = perm.size() - 1; i > 0; --i) {
                const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
                std::swap(perm[i], perm[j]);
            }
            out.permutation_statistics[b] = detail::group_distance(pooled.mean, pooled.shooting, perm, inner_opts);
        },
        opts.threads);
    std::size_t exceed = 0;
    for (double s : out.permutation_statistics)
        if (s >= out.observed_statistic) ++exceed;
    out.p_value = static_cast<double>(1 + exceed) / static_cast<double>(opts.permutations + 1);
    return out;
}

struct EnrichmentResult {
    std::string covariate;
    double probability = 0.5;
    double standard_error = 0.0;
    int y1 = 0;
    int n1 = 0;
    int y2 = 0;
    int n2 = 0;
    long draws = 0;
    std::uint64_t rng_seed = 0;
    /// "cluster1" above 0.75, "cluster2" below 0.25, empty otherwise.
    std::string flag;
};

namespace detail {

inline double beta_draw(std::mt19937_64& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

inline EnrichmentResult enrichment_unchecked(int y1, int n1, int y2, int n2, long draws, std::uint64_t seed) {
    EnrichmentResult r;
    r.y1 = y1;
    r.n1 = n1;
    r.y2 = y2;
    r.n2 = n2;
    r.draws = draws;
    r.rng_seed = seed;
    std::mt19937_64 rng(seed);
    long wins = 0;
    for (long s = 0; s < draws; ++s) {
        const double t1 = beta_draw(rng, y1 + 1.0, n1 - y1 + 1.0);
        const double t2 = beta_draw(rng, y2 + 1.0, n2 - y2 + 1.0);
        if (t1 > t2) ++wins;
    }
    r.probability = static_cast<double>(wins) / static_cast<double>(draws);
    r.standard_error = std::sqrt(r.probability * (1.0 - r.probability) / static_cast<double>(draws));
    if (r.probability > 0.75) r.flag = "cluster1";
    else if (r.probability < 0.25) r.flag = "cluster2";
    return r;
}

} // namespace detail

/// Monte Carlo P(theta1 > theta2) for theta_i ~ Beta(y_i + 1, n_i - y_i + 1).
inline EnrichmentResult enrichment_probability(int y1, int n1, int y2, int n2, long draws = 100000,
                                               std::uint64_t rng_seed = 0) {
    if (n1 < 1 || n2 < 1 || y1 < 0 || y2 < 0 || y1 > n1 || y2 > n2)
        throw Error(ErrorCode::InvalidCounts, "counts must satisfy 0 <= y <= n, n >= 1");
    if (draws < 10000) throw Error(ErrorCode::InvalidArgument, "at least 10000 draws required");
    return detail::enrichment_unchecked(y1, n1, y2, n2, draws, rng_seed);
}

struct EnrichmentScreen {
    std::vector<EnrichmentResult> results;
    /// Covariates skipped because they could not be coded as binary.
    std::vector<std::string> warnings;
};

namespace detail {

/// Binary codings of one covariate: numeric 0/1 as is, each string level one-vs-rest.
inline std::vector<std::pair<std::string, std::vector<int>>> binary_codings(const std::string& name,
                                                                            const std::vector<Covariates>& cov,
                                                                            std::string& warning) {
    std::set<std::string> levels;
    bool numeric = false;
    bool text = false;
    for (const auto& c : cov) {
        auto it = c.find(name);
        if (it == c.end()) continue;
        if (const double* v = std::get_if<double>(&it->second)) {
            numeric = true;
            if (*v != 0.0 && *v != 1.0) {
                warning = name + ": numeric values other than 0/1";
                return {};
            }
        } else {
            text = true;
            levels.insert(std::get<std::string>(it->second));
        }
    }
    if (numeric && text) {
        warning = name + ": mixed numeric and text values";
        return {};
    }
    std::vector<std::pair<std::string, std::vector<int>>> out;
    if (numeric) {
        std::vector<int> code;
        for (const auto& c : cov) {
            auto it = c.find(name);
            code.push_back(it == c.end() ? -1 : static_cast<int>(std::get<double>(it->second)));
        }
        out.emplace_back(name, std::move(code));
        return out;
    }
    for (const auto& level : levels) {
        std::vector<int> code;
        for (const auto& c : cov) {
            auto it = c.find(name);
            code.push_back(it == c.end() ? -1 : (std::get<std::string>(it->second) == level ? 1 : 0));
        }
        out.emplace_back(name + "=" + level, std::move(code));
    }
    return out;
}

} // namespace detail

/// Enrichment of each binary-codable covariate in a two-cluster assignment.
/// y1 counts the 1s in cluster 1 out of n1 total 1s; y2 counts the 0s in
/// cluster 1 out of n2 total 0s. Shapes missing a covariate are left out.
inline EnrichmentScreen enrichment_screen(const ClusterAssignment& assignment, const std::vector<Covariates>& covariates,
                                          const std::vector<std::string>& names, long draws = 100000,
                                          std::uint64_t rng_seed = 0, int threads = 0) {
    if (assignment.k != 2) throw Error(ErrorCode::InvalidArgument, "enrichment needs a two-cluster assignment");
    if (covariates.size() != assignment.labels.size()) throw Error(ErrorCode::InvalidArgument, "one covariate map per shape required");
    if (draws < 10000) throw Error(ErrorCode::InvalidArgument, "at least 10000 draws required");
    EnrichmentScreen screen;
    std::vector<std::pair<std::string, std::vector<int>>> codings;
    for (const auto& name : names) {
        std::string warning;
        auto c = detail::binary_codings(name, covariates, warning);
        if (!warning.empty()) screen.warnings.push_back(to_string(ErrorCode::NonBinaryCovariate) + std::string(": ") + warning);
        for (auto& x : c) codings.push_back(std::move(x));
    }
    screen.results.resize(codings.size());
    parallel_for(
        codings.size(),
        [&](std::size_t c) {
            const auto& code = codings[c].second;
            int y1 = 0, n1 = 0, y2 = 0, n2 = 0;
            for (std::size_t i = 0; i < code.size(); ++i) {
                if (code[i] < 0) continue;
                const bool in_first = assignment.labels[i] == 1;
                if (code[i] == 1) {
                    ++n1;
                    if (in_first) ++y1;
                } else {
                    ++n2;
                    if (in_first) ++y2;
                }
            }
            EnrichmentResult r = detail::enrichment_unchecked(y1, n1, y2, n2, draws, derive_seed(rng_seed, c));
            r.covariate = codings[c].first;
            screen.results[c] = std::move(r);
        },
        threads);
    return screen;
}

} // namespace elastic
