#pragma once

// Analysis configuration: flat JSON with defaults merged, plus a digest
// stamped on every emitted table.

#include "elastic/core.hpp"
#include "elastic/inference.hpp"
#include "elastic/registration.hpp"
#include "elastic/shapestats.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace elastic {

struct AnalysisConfig {
    int m = 128;
    int waypoints = 7;
    int seed_stride = 0;
    std::string slope_set = "default";
    double geodesic_tol = 1e-8;
    int geodesic_max_iterations = 300;
    double mean_tol = 1e-4;
    int mean_max_iterations = 100;
    double mean_step = 0.5;
    double projection_tol = 1e-10;
    std::uint64_t rng_seed = 0;
    long draws = 100000;
    int permutations = 1000;
    int k_clusters = 2;
    int mds_dims = 2;
    std::string output_dir = ".";
    int threads = 0;

    void validate() const {
        auto bad = [](const std::string& what) { throw Error(ErrorCode::InputError, "config: " + what); };
        if (m < 32) bad("m must be at least 32");
        if (waypoints < 5) bad("waypoints must be at least 5");
        if (seed_stride < 0 || (seed_stride > 0 && m % seed_stride != 0)) bad("seed_stride must divide m");
        if (slope_set != "default" && slope_set != "narrow") bad("slope_set must be 'default' or 'narrow'");
        if (!(geodesic_tol > 0.0) || !(mean_tol > 0.0) || !(projection_tol > 0.0)) bad("tolerances must be positive");
        if (!(mean_step > 0.0)) bad("mean_step must be positive");
        if (geodesic_max_iterations < 1 || mean_max_iterations < 1) bad("iteration caps must be positive");
        if (draws < 10000) bad("draws must be at least 10000");
        if (permutations < 1) bad("permutations must be positive");
        if (k_clusters < 1) bad("k_clusters must be positive");
        if (mds_dims < 1) bad("mds_dims must be positive");
    }

    std::vector<LatticeStep> slopes() const {
        if (slope_set == "narrow") return {{1, 1}, {2, 1}, {1, 2}};
        return default_slope_set();
    }

    DistanceOptions distance_options() const {
        DistanceOptions d;
        d.registration.seed_stride = seed_stride;
        d.registration.slopes = slopes();
        d.geodesic.waypoints = waypoints;
        d.geodesic.energy_tol = geodesic_tol;
        d.geodesic.max_iterations = geodesic_max_iterations;
        d.geodesic.projection.residual_tol = projection_tol;
        return d;
    }

    KarcherOptions karcher_options() const {
        KarcherOptions k;
        k.step = mean_step;
        k.tolerance = mean_tol;
        k.max_iterations = mean_max_iterations;
        k.distance = distance_options();
        k.exp.projection.residual_tol = projection_tol;
        k.threads = threads;
        return k;
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AnalysisConfig, m, waypoints, seed_stride, slope_set, geodesic_tol,
                                                geodesic_max_iterations, mean_tol, mean_max_iterations, mean_step,
                                                projection_tol, rng_seed, draws, permutations, k_clusters, mds_dims,
                                                output_dir, threads)

/// Merges a JSON object over the defaults. Unknown keys are an input error.
inline AnalysisConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::InputError, "config must be a JSON object");
    const nlohmann::json defaults = AnalysisConfig{};
    for (const auto& [key, value] : j.items())
        if (!defaults.contains(key)) throw Error(ErrorCode::InputError, "config: unknown key '" + key + "'");
    AnalysisConfig c;
    try {
        c = j.get<AnalysisConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InputError, std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

inline AnalysisConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InputError, "cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InputError, "config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

/// FNV-1a 64 of the canonical JSON of every result-affecting field.
inline std::string config_digest(const AnalysisConfig& c) {
    nlohmann::json j = c;
    j.erase("output_dir");
    j.erase("threads");
    const std::string text = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace elastic
