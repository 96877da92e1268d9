// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   acceptance <path-to-elastic-shape> <work-dir>

#include "oracles.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace elastic;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Srvf random_shape_srvf(std::mt19937_64& rng, Eigen::Index m, double amplitude = 0.25) {
    return to_srvf(synthetic::random_radial_curve(rng, 6, amplitude).sample(4 * m), m);
}

// Shared by criteria 1-3: every computed d_S is also bound-checked.
std::vector<double> all_shape_distances;

Outcome invariance() {
    const Eigen::Index m = 128;
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int c = 0; c < 50; ++c) {
        const auto curve = synthetic::random_radial_curve(rng);
        const auto warp = synthetic::random_warp(rng);
        const Srvf q = to_srvf(curve.sample(4 * m), m);
        const Srvf copy = to_srvf(synthetic::transformed_copy(curve, 4 * m, 2.0 * kPi * u(rng), warp, u(rng)), m);
        const double d = distance_shape(q, copy).distance;
        all_shape_distances.push_back(d);
        worst = std::max(worst, d);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 5e-3 && secs < 120.0, "worst d_S " + fmt("%.3e", worst) + " (< 5e-3), " + fmt("%.1f", secs) + " s (< 120 s)"};
}

Outcome elastic_below_nonelastic() {
    const Eigen::Index m = 128;
    std::mt19937_64 rng(202);
    double worst_excess = -1.0;
    for (int p = 0; p < 100; ++p) {
        const Srvf a = random_shape_srvf(rng, m, 0.4);
        const Srvf b = random_shape_srvf(rng, m, 0.4);
        const ShapeDistance ds = distance_shape(a, b);
        const double dne = distance_nonelastic(a, b);
        all_shape_distances.push_back(ds.distance);
        worst_excess = std::max(worst_excess, ds.distance - dne);
    }
    // Peaked analogs: feature counts differ, so stretching must pay off.
    const std::pair<int, int> peaked[] = {{3, 2}, {4, 3}, {2, 4}, {5, 3}};
    double smallest_gap = 1e9;
    std::string pairs;
    for (const auto& [p1, p2] : peaked) {
        const Srvf a = to_srvf(synthetic::peaked_curve(p1, 0.3).sample(4 * m), m);
        const Srvf b = to_srvf(synthetic::peaked_curve(p2, 0.3).sample(4 * m), m);
        const double ds = distance_shape(a, b).distance;
        const double dne = distance_nonelastic(a, b);
        all_shape_distances.push_back(ds);
        smallest_gap = std::min(smallest_gap, dne - ds);
        pairs += " " + std::to_string(p1) + "v" + std::to_string(p2) + ":" + fmt("%.4f", ds) + "<" + fmt("%.4f", dne);
    }
    return {worst_excess <= 1e-6 && smallest_gap > 0.0,
            "max d_S - d_NE " + fmt("%.2e", worst_excess) + " over 100 pairs; peaked" + pairs};
}

Outcome bounds() {
    double lo = 1e9, hi = -1e9;
    for (double d : all_shape_distances) {
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    const bool ok = !all_shape_distances.empty() && lo >= 0.0 && hi <= kPi / 2 + 1e-3;
    return {ok, std::to_string(all_shape_distances.size()) + " distances in [" + fmt("%.3e", lo) + ", " + fmt("%.4f", hi) + "]"};
}

Outcome dp_oracle() {
    std::mt19937_64 rng(404);
    double worst = 0.0;
    long paths = 0;
    for (int p = 0; p < 20; ++p) {
        const Srvf a = random_shape_srvf(rng, 16, 0.5);
        const Srvf b = random_shape_srvf(rng, 16, 0.5);
        const DpResult dp = dp_match(a, b);
        const auto brute = oracle::exhaustive_lattice(a.samples, b.samples);
        paths = brute.paths;
        worst = std::max(worst, std::abs(dp.cost - brute.cost) / std::max(1.0, brute.cost));
    }
    // Both sum identical segment costs; only the summation order can differ.
    return {worst <= 1e-12, "max relative gap " + fmt("%.2e", worst) + " on 20 pairs, " + std::to_string(paths) + " paths each"};
}

SpeedAnglePerturbation smooth_perturbation(const CurveSpeedAngle& base, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    const auto m = base.speed.size();
    SpeedAnglePerturbation p{Eigen::VectorXd::Zero(m), Field::Zero(m, 2)};
    for (int k = 1; k <= 4; ++k) {
        const double a = 0.3 * z(rng) / k, b = 0.3 * z(rng) / k, c = 0.3 * z(rng) / k, d = 0.3 * z(rng) / k;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double t = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(m);
            p.dspeed[i] += (a * std::cos(t) + b * std::sin(t)) * base.speed[i];
            const double w = c * std::cos(t) + d * std::sin(t);
            p.dangle(i, 0) += -w * base.angle(i, 1);
            p.dangle(i, 1) += w * base.angle(i, 0);
        }
    }
    return p;
}

Outcome metric_reduction() {
    std::mt19937_64 rng(505);
    double worst = 0.0;
    for (int t = 0; t < 20; ++t) {
        const auto base = speed_angle(synthetic::random_radial_curve(rng).sample(256));
        const auto p1 = smooth_perturbation(base, rng);
        const auto p2 = smooth_perturbation(base, rng);
        const auto r = elastic_metric_check(base, p1, p2);
        const double scale = std::sqrt(std::abs(elastic_metric_check(base, p1, p1).l2_srvf_value *
                                                elastic_metric_check(base, p2, p2).l2_srvf_value));
        worst = std::max(worst, std::abs(r.elastic_value - r.l2_srvf_value) / scale);
    }
    return {worst < 1e-4, "max |<.,.>_(1/4,1) - <.,.>_L2| / (|u||v|) " + fmt("%.2e", worst) + " on 20 triples at m=256"};
}

Field smooth_field(std::mt19937_64& rng, Eigen::Index m) {
    std::normal_distribution<double> z(0.0, 1.0);
    Field f = Field::Zero(m, 2);
    for (int k = 1; k <= 4; ++k)
        for (int c = 0; c < 2; ++c) {
            const double a = z(rng) / k, b = z(rng) / k;
            for (Eigen::Index i = 0; i < m; ++i) {
                const double t = 2.0 * kPi * k * static_cast<double>(i) / static_cast<double>(m);
                f(i, c) += a * std::cos(t) + b * std::sin(t);
            }
        }
    return f;
}

Outcome geometry_round_trips() {
    const Eigen::Index m = 128;
    std::mt19937_64 rng(606);
    double worst_roundtrip = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Srvf q = random_shape_srvf(rng, m);
        TangentVector v = project_tangent(q, smooth_field(rng, m));
        v.samples *= 0.5 * static_cast<double>(t + 1) / 20.0 / norm(v.samples);
        const TangentVector back = inverse_exp(q, exp_map(q, v));
        worst_roundtrip = std::max(worst_roundtrip, norm(back.samples - v.samples));
    }
    double worst_shortfall = -1e9;
    bool monotone = true;
    for (int t = 0; t < 20; ++t) {
        const Srvf a = random_shape_srvf(rng, m, 0.4);
        const Srvf b = random_shape_srvf(rng, m, 0.4);
        const GeodesicPath p = geodesic(a, b);
        worst_shortfall = std::max(worst_shortfall, sphere_distance(a.samples, b.samples) - p.length);
        for (std::size_t i = 1; i < p.energy_history.size(); ++i) monotone = monotone && p.energy_history[i] <= p.energy_history[i - 1];
    }
    const bool ok = worst_roundtrip < 1e-3 && worst_shortfall <= 1e-12 && monotone;
    return {ok, "exp/log max error " + fmt("%.2e", worst_roundtrip) + " for |v| <= 0.5; great-circle shortfall " +
                    fmt("%.1e", worst_shortfall) + "; energy monotone " + (monotone ? "yes" : "no")};
}

Outcome statistics_recovery() {
    const Eigen::Index m = 128;
    std::mt19937_64 rng(11);
    const Srvf mu = to_srvf(synthetic::random_radial_curve(rng).sample(4 * m), m);
    const std::vector<double> planted{0.0025, 0.00125, 0.000625};
    const SpcaModel truth = synthetic::planted_model(mu, planted, 5);

    const ShapeEnsemble big = synthetic::sample_ensemble(truth, 200, 3);
    const KarcherResult fit = karcher_mean(big);
    const SpcaModel model = covariance_and_spca(fit.mean, fit.shooting);
    double worst = 0.0;
    std::string eig;
    for (int j = 0; j < 3; ++j) {
        const double got = j < model.rank() ? model.eigenvalues[j] : 0.0;
        worst = std::max(worst, std::abs(got - planted[static_cast<std::size_t>(j)]) / planted[static_cast<std::size_t>(j)]);
        eig += (j ? "/" : "") + fmt("%.5f", got);
    }

    const ShapeEnsemble small = synthetic::sample_ensemble(truth, 50, 4);
    const KarcherResult full = karcher_mean(small);
    const ReconstructionReport loo = loo_reconstruction(small, {}, &full);
    const double limit = 0.05 * (kPi / 2) * (kPi / 2);
    const bool ok = fit.converged && worst < 0.15 && loo.median < limit;
    return {ok, "eigenvalues " + eig + " vs planted 0.00250/0.00125/0.000625, max rel err " + fmt("%.3f", worst) +
                    " (< 0.15); LOO median " + fmt("%.2e", loo.median) + " (< " + fmt("%.4f", limit) + ")"};
}

ShapeEnsemble two_group_ensemble(std::size_t per_group, double separation, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Srvf mu = to_srvf(synthetic::random_radial_curve(rng).sample(256), 64);
    const auto dirs = synthetic::orbit_normal_directions(mu, 3, seed + 1);
    const Srvf centre_b = exp_map(mu, TangentVector(separation * dirs[0].samples));
    ShapeEnsemble e;
    for (std::size_t i = 0; i < 2 * per_group; ++i) {
        const bool second = i >= per_group;
        SpcaModel local;
        local.mean = second ? centre_b : mu;
        local.eigenvalues = Eigen::Vector2d(0.05 * 0.05, 0.05 * 0.05);
        for (int d = 1; d <= 2; ++d) {
            TangentVector u = project_tangent(local.mean, dirs[static_cast<std::size_t>(d)].samples);
            u.samples /= norm(u.samples);
            local.eigenvectors.push_back(u);
        }
        e.add(random_shape(local, derive_seed(seed, i), 2), (second ? "b" : "a") + std::to_string(i));
    }
    return e;
}

int rejections(int replicates, double separation, std::uint64_t base_seed) {
    std::vector<int> reject(static_cast<std::size_t>(replicates), 0);
    parallel_for(static_cast<std::size_t>(replicates), [&](std::size_t r) {
        const ShapeEnsemble e = two_group_ensemble(6, separation, base_seed + r);
        std::vector<int> labels(12, 0);
        std::fill(labels.begin() + 6, labels.end(), 1);
        PermutationOptions o;
        o.permutations = 199;
        o.rng_seed = derive_seed(base_seed, r);
        o.threads = 1;
        o.karcher.threads = 1;
        reject[r] = permutation_test_mean_shape(e, labels, o).p_value <= 0.05;
    });
    int total = 0;
    for (int x : reject) total += x;
    return total;
}

Outcome permutation_calibration() {
    const int null_reps = 200, power_reps = 60;
    const int null_reject = rejections(null_reps, 0.0, 10000);
    const int power_reject = rejections(power_reps, 0.5, 20000);
    const double level = static_cast<double>(null_reject) / null_reps;
    const double power = static_cast<double>(power_reject) / power_reps;
    return {level >= 0.02 && level <= 0.10 && power >= 0.95,
            "level " + fmt("%.3f", level) + " over 200 null replicates (B=199), power " + fmt("%.3f", power) + " over " +
                std::to_string(power_reps) + " planted replicates"};
}

Outcome enrichment_oracle() {
    const EnrichmentResult extreme = enrichment_probability(10, 10, 0, 10, 100000, 17);
    const EnrichmentResult even = enrichment_probability(5, 10, 5, 10, 100000, 18);
    const double exact = 1.0 - 1.0 / oracle::choose(22, 11);
    const double closed = oracle::beta_greater(11, 1, 1, 11);
    const bool ok = std::abs(extreme.probability - exact) < 1e-3 && std::abs(even.probability - 0.5) < 0.02 &&
                    std::abs(closed - exact) < 1e-12;
    return {ok, "P(10/10 > 0/10) " + fmt("%.6f", extreme.probability) + " vs exact " + fmt("%.6f", exact) +
                    "; P(5/10 > 5/10) " + fmt("%.4f", even.probability)};
}

Outcome clustering_oracle() {
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int mismatches = 0;
    for (int t = 0; t < 200; ++t) {
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = i + 1; j < 6; ++j) d(i, j) = d(j, i) = t % 2 ? std::round(4.0 * u(rng)) / 4.0 + 0.25 : u(rng);
        const auto fast = hierarchical_cluster(d, 2).merges;
        const auto slow = oracle::naive_complete_linkage(d);
        for (std::size_t s = 0; s < 5; ++s)
            if (fast[s].a != slow[s].a || fast[s].b != slow[s].b || fast[s].height != slow[s].height || fast[s].size != slow[s].size)
                ++mismatches;
    }

    // One tight and one diffuse group around distinct centres.
    const Eigen::Index m = 64;
    const double spread[2] = {0.0004, 0.004};
    ShapeEnsemble e;
    std::vector<int> planted;
    for (int g = 0; g < 2; ++g) {
        const Srvf centre = to_srvf(synthetic::peaked_curve(g + 2, 0.25).sample(4 * m), m);
        const SpcaModel model = synthetic::planted_model(centre, {spread[g], spread[g] / 2}, 20 + static_cast<std::uint64_t>(g));
        const ShapeEnsemble part = synthetic::sample_ensemble(model, 8, 30 + static_cast<std::uint64_t>(g), g ? "diffuse" : "tight");
        for (std::size_t i = 0; i < part.size(); ++i) {
            e.add(part.shapes[i], part.ids[i]);
            planted.push_back(g + 1);
        }
    }
    const DistanceMatrix d = pairwise_distance_matrix(e, DistanceMode::Elastic);
    const ClusterAssignment a = hierarchical_cluster(d.values, 2);
    const bool recovered = a.labels == planted;
    std::vector<Eigen::VectorXd> cumulative;
    for (int g = 1; g <= 2; ++g) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < e.size(); ++i)
            if (a.labels[i] == g) members.push_back(i);
        const KarcherResult fit = karcher_mean(e.subset(members));
        const SpcaModel model = covariance_and_spca(fit.mean, fit.shooting);
        Eigen::VectorXd c(3);
        double run = 0.0;
        for (int r = 0; r < 3; ++r) c[r] = run += r < model.rank() ? model.eigenvalues[r] : 0.0;
        cumulative.push_back(c);
    }
    const bool ordered = recovered && (cumulative[0].array() < cumulative[1].array()).all();
    return {mismatches == 0 && recovered && ordered,
            std::to_string(mismatches) + " merge mismatches over 200 matrices; planted clusters " +
                (recovered ? "recovered" : "NOT recovered") + "; cumulative variance tight " +
                fmt("%.2e", cumulative[0][2]) + " < diffuse " + fmt("%.2e", cumulative[1][2])};
}

// ---------------------------------------------------------------------------
// CLI determinism

void write_cli_fixture(const fs::path& dir) {
    fs::create_directories(dir / "shapes");
    nlohmann::json manifest = nlohmann::json::array();
    std::mt19937_64 rng(1111);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        const int g = i % 2;
        auto curve = synthetic::peaked_curve(g + 2, 0.2);
        const auto jitter = synthetic::random_radial_curve(rng, 4, 0.04);
        for (std::size_t k = 0; k < jitter.a.size(); ++k) {
            if (k >= curve.a.size()) {
                curve.a.resize(k + 1, 0.0);
                curve.b.resize(k + 1, 0.0);
            }
            curve.a[k] += jitter.a[k];
            curve.b[k] += jitter.b[k];
        }
        const Contour c = synthetic::transformed_copy(curve, 150, 2.0 * kPi * u(rng), synthetic::random_warp(rng, 2, 0.3), u(rng));
        const std::string id = "c" + std::to_string(i);
        io::write_text(dir / "shapes" / (id + ".csv"), io::contour_csv(c.points));
        manifest.push_back({{"id", id},
                            {"path", "shapes/" + id + ".csv"},
                            {"covariates", {{"survival", 8.0 + 6.0 * g + i}, {"grade", g}, {"subtype", i % 3 ? "x" : "y"}}}});
    }
    io::write_text(dir / "manifest.json", manifest.dump(2));
    io::write_text(dir / "config.json", R"({"m": 64, "permutations": 39, "draws": 20000, "rng_seed": 42})");
}

bool same_output(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(a))
        if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), a));
    std::size_t count_b = 0;
    for (const auto& entry : fs::recursive_directory_iterator(b)) count_b += entry.is_regular_file();
    if (files.empty() || files.size() != count_b) {
        why = "file sets differ";
        return false;
    }
    for (const auto& rel : files) {
        if (!fs::exists(b / rel)) {
            why = rel.string() + " missing in re-run";
            return false;
        }
        std::string x = io::read_text(a / rel), y = io::read_text(b / rel);
        if (rel.extension() == ".json") {
            auto jx = nlohmann::json::parse(x), jy = nlohmann::json::parse(y);
            if (jx.is_object()) jx.erase("metadata");
            if (jy.is_object()) jy.erase("metadata");
            x = jx.dump();
            y = jy.dump();
        }
        if (x != y) {
            why = rel.string() + " differs";
            return false;
        }
    }
    return true;
}

Outcome cli_determinism(const std::string& exe, const fs::path& work) {
    fs::remove_all(work);
    write_cli_fixture(work);
    const std::string common = " --manifest " + (work / "manifest.json").string() + " --config " + (work / "config.json").string();
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"distance", "distance" + common},
        {"distance-ne", "distance --mode nonelastic" + common},
        {"geodesic", "geodesic --id1 c0 --id2 c1" + common},
        {"mean-pca", "mean-pca" + common},
        {"cluster", "cluster" + common},
        {"permtest", "permtest --label survival --cutoffs 12 15" + common},
        {"enrich", "enrich --labels " + (work / "cluster_a" / "labels.csv").string() + common},
        {"simulate", "simulate --count 4 --seed 9 --model " + (work / "mean-pca_a" / "model.json").string()},
        {"loo", "loo" + common},
    };
    std::string failures;
    for (const auto& [name, args] : commands) {
        bool ok = true;
        for (const char* run : {"_a", "_b"}) {
            const fs::path out = work / (name + run);
            const std::string cmd = "\"" + exe + "\" " + args + " --out " + out.string() + " > " + (work / (name + run)).string() + ".log 2>&1";
            const int rc = std::system(cmd.c_str());
            if (rc != 0) {
                failures += " " + name + "(exit " + std::to_string(rc) + ")";
                ok = false;
                break;
            }
        }
        std::string why;
        if (ok && !same_output(work / (name + "_a"), work / (name + "_b"), why)) failures += " " + name + "(" + why + ")";
    }
    return {failures.empty(), failures.empty() ? std::to_string(commands.size()) + " command runs byte-identical modulo metadata"
                                               : "failed:" + failures};
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 3) {
        std::cerr << "usage: acceptance <elastic-shape> <work-dir>\n";
        return 2;
    }
    const std::string exe = argv[1];
    const fs::path work = argv[2];

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"1 invariance", invariance},
        {"2 elastic<=nonelastic", elastic_below_nonelastic},
        {"3 distance bounds", bounds},
        {"4 DP optimality", dp_oracle},
        {"5 metric reduction", metric_reduction},
        {"6 geometry round trips", geometry_round_trips},
        {"7 statistics recovery", statistics_recovery},
        {"8 permutation calibration", permutation_calibration},
        {"9 enrichment oracle", enrichment_oracle},
        {"10 clustering oracle", clustering_oracle},
        {"11 CLI determinism", [&] { return cli_determinism(exe, work); }},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << name << "]  " << o.detail << "  (" << fmt("%.1f", secs) << " s)"
                  << std::endl;
    }
    std::cout << (failed ? std::to_string(failed) + " criteria failed" : std::string("all criteria passed")) << std::endl;
    return failed ? 1 : 0;
}
