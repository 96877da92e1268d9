#pragma once

#include "elastic/elastic.hpp"

#include <random>

namespace elastic::testing {

inline Contour ellipse(double a, double b, Eigen::Index n) {
    Field p(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
        p.row(i) << a * std::cos(t), b * std::sin(t);
    }
    return Contour{p, "ellipse", true};
}

inline Srvf random_srvf(std::mt19937_64& rng, Eigen::Index m, double amplitude = 0.25) {
    return to_srvf(synthetic::random_radial_curve(rng, 6, amplitude).sample(m), m);
}

inline double max_abs(const Field& a) { return a.cwiseAbs().maxCoeff(); }

} // namespace elastic::testing
