#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include "elastic/elastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

namespace elastic::oracle {

// Squared L2 segment cost from (k,l) to (k+di, l+dj) with q2 evaluated by
// linear interpolation at the exact rational lattice positions.
inline double segment_cost(const Field& q1, const Field& q2, int k, int l, int di, int dj) {
    const auto m = static_cast<int>(q1.rows());
    const double root = std::sqrt(static_cast<double>(dj) / di);
    double c = 0.0;
    for (int u = 0; u < di; ++u) {
        const int num = l * di + u * dj;
        const int cell = num / di;
        const double f = static_cast<double>(num % di) / di;
        const Vec2 b = (1.0 - f) * q2.row(cell % m).transpose() + f * q2.row((cell + 1) % m).transpose();
        const double dx = q1(k + u, 0) - root * b.x();
        const double dy = q1(k + u, 1) - root * b.y();
        c += dx * dx + dy * dy;
    }
    return c / m;
}

namespace detail_oracle {

inline void search(const Field& q1, const Field& q2, const std::vector<LatticeStep>& steps, int i, int j, double acc,
                   double& best, long& paths) {
    const auto m = static_cast<int>(q1.rows());
    if (i == m && j == m) {
        ++paths;
        best = std::min(best, acc);
        return;
    }
    for (const auto& s : steps) {
        if (i + s.di > m || j + s.dj > m) continue;
        search(q1, q2, steps, i + s.di, j + s.dj, acc + segment_cost(q1, q2, i, j, s.di, s.dj), best, paths);
    }
}

} // namespace detail_oracle

struct ExhaustiveResult {
    double cost = std::numeric_limits<double>::infinity();
    long paths = 0;
};

/// Minimum over every lattice path from (0,0) to (m,m); exponential in m.
inline ExhaustiveResult exhaustive_lattice(const Field& q1, const Field& q2,
                                           const std::vector<LatticeStep>& steps = default_slope_set()) {
    ExhaustiveResult r;
    detail_oracle::search(q1, q2, steps, 0, 0, 0.0, r.cost, r.paths);
    return r;
}

/// Complete linkage by recomputing every cluster-pair maximum from scratch.
inline std::vector<Merge> naive_complete_linkage(const Eigen::MatrixXd& d) {
    const int n = static_cast<int>(d.rows());
    std::vector<std::pair<int, std::vector<int>>> live;
    for (int i = 0; i < n; ++i) live.push_back({i, {i}});
    std::vector<Merge> merges;
    for (int step = 0; step < n - 1; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<int, int> arg{-1, -1};
        std::size_t ai = 0, bi = 0;
        for (std::size_t x = 0; x < live.size(); ++x)
            for (std::size_t y = 0; y < live.size(); ++y) {
                if (x == y) continue;
                double link = 0.0;
                for (int p : live[x].second)
                    for (int q : live[y].second) link = std::max(link, d(p, q));
                const std::pair<int, int> ids{std::min(live[x].first, live[y].first), std::max(live[x].first, live[y].first)};
                if (link < best || (link == best && ids < arg)) {
                    best = link;
                    arg = ids;
                    ai = x;
                    bi = y;
                }
            }
        if (live[ai].first > live[bi].first) std::swap(ai, bi);
        std::vector<int> merged = live[ai].second;
        merged.insert(merged.end(), live[bi].second.begin(), live[bi].second.end());
        merges.push_back({live[ai].first, live[bi].first, best, static_cast<int>(merged.size())});
        live[ai] = {n + step, merged};
        live.erase(live.begin() + static_cast<long>(bi));
    }
    return merges;
}

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Exact P(X > Y) for X ~ Beta(a1, b1), Y ~ Beta(a2, b2) with integer a1.
inline double beta_greater(int a1, int b1, int a2, int b2) {
    // Closed form: sum_{i<a1} B(a2 + i, b1 + b2) / ((b1 + i) B(1 + i, b1) B(a2, b2)).
    double p = 0.0;
    for (int i = 0; i < a1; ++i)
        p += std::exp(log_beta(a2 + i, b1 + b2) - std::log(b1 + i) - log_beta(1 + i, b1) - log_beta(a2, b2));
    return p;
}

/// Binomial coefficient as a double.
inline double choose(int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); }

} // namespace elastic::oracle
