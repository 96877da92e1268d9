// elastic-shape: batch front end for the elastic shape library.
//
// Every command writes into --out. Tables carry the config digest (a leading
// "# config_digest=" line in CSV, a "config_digest" key in JSON); the only
// non-deterministic value, the run timestamp, lives under "metadata" in JSON.
//
// Exit codes: 0 success, 2 input error, 3 numerical non-convergence.

#include "elastic/elastic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace elastic;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

/// Raised for results that were written but did not converge.
struct NotConverged {
    std::string what;
};

struct Common {
    std::string manifest;
    std::string config;
    std::string out = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> m;
    std::optional<int> threads;
    std::string mode = "elastic";
};

struct Context {
    AnalysisConfig config;
    std::string digest;
    fs::path out;
    DistanceMode mode = DistanceMode::Elastic;
};

Context make_context(const Common& c) {
    Context ctx;
    ctx.config = c.config.empty() ? AnalysisConfig{} : load_config(c.config);
    if (c.seed) ctx.config.rng_seed = *c.seed;
    if (c.m) ctx.config.m = *c.m;
    if (c.threads) ctx.config.threads = *c.threads;
    if (c.out != ".") ctx.config.output_dir = c.out;
    ctx.config.validate();
    ctx.digest = config_digest(ctx.config);
    ctx.out = ctx.config.output_dir;
    ctx.mode = c.mode == "nonelastic" ? DistanceMode::Nonelastic : DistanceMode::Elastic;
    std::error_code ec;
    fs::create_directories(ctx.out, ec);
    if (ec) throw Error(ErrorCode::InputError, "cannot create output directory '" + ctx.out.string() + "'");
    return ctx;
}

std::string timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const Context& ctx, const std::string& name, json j, const std::string& command) {
    j["config_digest"] = ctx.digest;
    j["config"] = ctx.config;
    j["config"].erase("output_dir");
    j["config"].erase("threads");
    j["metadata"] = {{"tool", "elastic-shape"}, {"command", command}, {"generated_at", timestamp()}};
    io::write_text(ctx.out / name, j.dump(2) + "\n");
}

void write_table(const Context& ctx, const std::string& name, const std::string& csv) {
    io::write_text(ctx.out / name, "# config_digest=" + ctx.digest + "\n" + csv);
}

std::string num(double v) { return io::format_number(v); }

io::LoadedEnsemble load(const Common& c, const Context& ctx) {
    if (c.manifest.empty()) throw Error(ErrorCode::InputError, "--manifest is required");
    return io::load_ensemble(c.manifest, ctx.config.m, ctx.config.distance_options().geodesic.projection);
}

std::size_t index_of(const ShapeEnsemble& e, const std::string& id) {
    const auto it = std::find(e.ids.begin(), e.ids.end(), id);
    if (it == e.ids.end()) throw Error(ErrorCode::InputError, "id '" + id + "' is not in the manifest");
    return static_cast<std::size_t>(it - e.ids.begin());
}

std::optional<double> numeric_covariate(const Covariates& cov, const std::string& name) {
    const auto it = cov.find(name);
    if (it == cov.end() || !std::holds_alternative<double>(it->second)) return std::nullopt;
    return std::get<double>(it->second);
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Reads "id,cluster" rows, skipping comments and a header line.
std::map<std::string, int> read_labels(const fs::path& path) {
    std::istringstream in(io::read_text(path));
    std::map<std::string, int> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::InputError, path.string() + ":" + std::to_string(lineno) + ": expected id,cluster");
        const std::string id = line.substr(0, comma);
        const std::string value = line.substr(comma + 1);
        char* end = nullptr;
        const long label = std::strtol(value.c_str(), &end, 10);
        if (end == value.c_str()) {
            if (out.empty() && id == "id") continue;
            throw Error(ErrorCode::InputError, path.string() + ":" + std::to_string(lineno) + ": non-integer cluster label");
        }
        if (!out.emplace(id, static_cast<int>(label)).second) throw Error(ErrorCode::InputError, "duplicate id '" + id + "' in labels");
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_distance(const Common& c) {
    const Context ctx = make_context(c);
    const io::LoadedEnsemble data = load(c, ctx);
    const DistanceMatrix d = pairwise_distance_matrix(data.ensemble, ctx.mode, ctx.config.distance_options(), ctx.config.threads);
    const std::string stem = std::string("distance_") + to_string(ctx.mode);
    write_table(ctx, stem + ".csv", io::matrix_csv(d.values, d.ids));
    json j;
    j["mode"] = to_string(ctx.mode);
    j["m"] = ctx.config.m;
    j["seed_stride"] = ctx.config.seed_stride;
    j["slope_set"] = ctx.config.slope_set;
    j["max_asymmetry"] = d.max_asymmetry;
    j["ids"] = d.ids;
    write_json(ctx, stem + ".json", j, "distance");
    std::cout << "wrote " << (ctx.out / (stem + ".csv")).string() << " (" << d.ids.size() << " shapes)\n";
    return 0;
}

int cmd_geodesic(const Common& c, const std::string& id1, const std::string& id2) {
    const Context ctx = make_context(c);
    const io::LoadedEnsemble data = load(c, ctx);
    const Srvf& q1 = data.ensemble.shapes[index_of(data.ensemble, id1)];
    const Srvf& q2 = data.ensemble.shapes[index_of(data.ensemble, id2)];
    const DistanceOptions opts = ctx.config.distance_options();
    json j;
    j["id1"] = id1;
    j["id2"] = id2;
    j["primary_mode"] = to_string(ctx.mode);
    std::vector<std::vector<Srvf>> rows;
    std::vector<std::string> captions;
    for (DistanceMode mode : {DistanceMode::Elastic, DistanceMode::Nonelastic}) {
        const ShapeDistance sd = distance(q1, q2, mode, opts);
        std::vector<Srvf> row;
        json waypoints = json::array();
        for (const Field& w : sd.path.waypoints) {
            row.emplace_back(w);
            waypoints.push_back(io::field_to_json(w));
        }
        rows.push_back(std::move(row));
        captions.push_back(std::string(to_string(mode)) + "  d = " + svg::num(sd.distance));
        j[to_string(mode)] = {{"distance", sd.distance},
                              {"rotation_angle", std::atan2(sd.registration.rotation(1, 0), sd.registration.rotation(0, 0))},
                              {"seed_shift", sd.registration.seed_shift},
                              {"iterations", sd.path.iterations},
                              {"waypoints", waypoints}};
    }
    if (ctx.mode == DistanceMode::Nonelastic) {
        std::swap(rows[0], rows[1]);
        std::swap(captions[0], captions[1]);
    }
    j["distance"] = j[to_string(ctx.mode)]["distance"];
    const std::string stem = "geodesic_" + id1 + "_" + id2;
    write_json(ctx, stem + ".json", j, "geodesic");
    io::write_text(ctx.out / (stem + ".svg"), svg::shape_rows(rows, captions));
    std::cout << to_string(ctx.mode) << " distance " << num(j["distance"].get<double>()) << "\n";
    return 0;
}

SpcaModel fit_model(const KarcherResult& fit, const ShapeEnsemble& e) {
    SpcaModel model;
    if (e.size() < 2) {
        model.mean = fit.mean;
        model.coefficients = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(e.size()), 0);
    } else {
        model = covariance_and_spca(fit.mean, fit.shooting);
    }
    model.ids = e.ids;
    return model;
}

int cmd_mean_pca(const Common& c) {
    const Context ctx = make_context(c);
    const io::LoadedEnsemble data = load(c, ctx);
    const KarcherResult fit = karcher_mean(data.ensemble, ctx.config.karcher_options());
    const SpcaModel model = fit_model(fit, data.ensemble);
    json j = io::model_to_json(model);
    j["karcher"] = {{"iterations", fit.iterations},
                    {"converged", fit.converged},
                    {"variance", fit.variance()},
                    {"variance_history", fit.variance_history}};
    write_json(ctx, "model.json", j, "mean-pca");
    write_table(ctx, "coefficients.csv", io::coefficients_csv(model));
    std::vector<std::vector<Srvf>> rows{{model.mean}};
    std::vector<std::string> captions{"Karcher mean"};
    const std::vector<double> t{-2.0, -1.0, 0.0, 1.0, 2.0};
    for (int k = 0; k < std::min(3, model.positive_count); ++k) {
        rows.push_back(principal_direction_path(model, k, t));
        captions.push_back("PC" + std::to_string(k + 1) + "  -2sd .. +2sd");
    }
    io::write_text(ctx.out / "principal_directions.svg", svg::shape_rows(rows, captions));
    std::cout << "mean of " << data.ensemble.size() << " shapes after " << fit.iterations << " iterations; " << model.rank()
              << " directions\n";
    if (!fit.converged) throw NotConverged{"Karcher mean did not converge"};
    return 0;
}

int cmd_cluster(const Common& c, std::optional<int> k_override, const std::string& survival) {
    Context ctx = make_context(c);
    if (k_override) {
        ctx.config.k_clusters = *k_override;
        ctx.config.validate();
        ctx.digest = config_digest(ctx.config);
    }
    const io::LoadedEnsemble data = load(c, ctx);
    const ShapeEnsemble& e = data.ensemble;
    const DistanceMatrix d = pairwise_distance_matrix(e, ctx.mode, ctx.config.distance_options(), ctx.config.threads);
    if (ctx.config.k_clusters > static_cast<int>(e.size())) throw Error(ErrorCode::InputError, "k exceeds the number of shapes");
    const ClusterAssignment assignment = hierarchical_cluster(d.values, ctx.config.k_clusters);
    const MdsResult mds = classical_mds(d.values, std::min<int>(ctx.config.mds_dims, static_cast<int>(e.size())));

    std::string labels = "id,cluster\n";
    std::string coords = "id";
    for (Eigen::Index a = 0; a < mds.coordinates.cols(); ++a) coords += ",dim" + std::to_string(a + 1);
    coords += "\n";
    for (std::size_t i = 0; i < e.size(); ++i) {
        labels += e.ids[i] + "," + std::to_string(assignment.labels[i]) + "\n";
        coords += e.ids[i];
        for (Eigen::Index a = 0; a < mds.coordinates.cols(); ++a) coords += "," + num(mds.coordinates(static_cast<Eigen::Index>(i), a));
        coords += "\n";
    }
    write_table(ctx, "labels.csv", labels);
    write_table(ctx, "mds.csv", coords);
    io::write_text(ctx.out / "mds.svg", svg::scatter(mds.coordinates, assignment.labels, e.ids));

    std::string spca = "cluster,size,pc,eigenvalue,cumulative_variance,cumulative_proportion\n";
    std::string surv = "cluster,n,mean,median\n";
    bool any_survival = false;
    bool all_converged = true;
    json clusters = json::array();
    for (int g = 1; g <= assignment.k; ++g) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < e.size(); ++i)
            if (assignment.labels[i] == g) members.push_back(i);
        json cj = {{"cluster", g}, {"size", members.size()}};
        if (members.size() >= 2) {
            const ShapeEnsemble sub = e.subset(members);
            const KarcherResult fit = karcher_mean(sub, ctx.config.karcher_options());
            all_converged = all_converged && fit.converged;
            const SpcaModel model = covariance_and_spca(fit.mean, fit.shooting);
            double cum = 0.0;
            for (int r = 0; r < std::min(5, model.rank()); ++r) {
                cum += model.eigenvalues[r];
                spca += std::to_string(g) + "," + std::to_string(members.size()) + "," + std::to_string(r + 1) + "," +
                        num(model.eigenvalues[r]) + "," + num(cum) + "," +
                        num(model.total_variance > 0.0 ? cum / model.total_variance : 0.0) + "\n";
            }
            cj["total_variance"] = model.total_variance;
            cj["mean_converged"] = fit.converged;
        }
        std::vector<double> values;
        for (std::size_t i : members)
            if (auto v = numeric_covariate(e.covariates[i], survival)) values.push_back(*v);
        if (!values.empty()) {
            any_survival = true;
            double mean = 0.0;
            for (double v : values) mean += v;
            mean /= static_cast<double>(values.size());
            surv += std::to_string(g) + "," + std::to_string(values.size()) + "," + num(mean) + "," + num(median_of(values)) + "\n";
        }
        clusters.push_back(cj);
    }
    write_table(ctx, "cluster_spca.csv", spca);
    if (any_survival) write_table(ctx, "cluster_" + survival + ".csv", surv);

    json j;
    j["mode"] = to_string(ctx.mode);
    j["k"] = assignment.k;
    j["linkage"] = assignment.linkage;
    j["clusters"] = clusters;
    j["merge_heights"] = assignment.merge_heights;
    j["mds_eigenvalues"] = std::vector<double>(mds.eigenvalues.data(), mds.eigenvalues.data() + mds.eigenvalues.size());
    j["mds_negative_mass"] = mds.negative_mass;
    j["max_asymmetry"] = d.max_asymmetry;
    write_json(ctx, "cluster.json", j, "cluster");
    std::cout << assignment.k << " clusters over " << e.size() << " shapes\n";
    if (!all_converged) throw NotConverged{"a cluster-wise Karcher mean did not converge"};
    return 0;
}

int cmd_permtest(const Common& c, const std::string& label, const std::vector<double>& cutoffs,
                 std::optional<int> permutations) {
    Context ctx = make_context(c);
    if (permutations) {
        ctx.config.permutations = *permutations;
        ctx.config.validate();
        ctx.digest = config_digest(ctx.config);
    }
    const io::LoadedEnsemble data = load(c, ctx);
    const ShapeEnsemble& e = data.ensemble;
    if (label.empty()) throw Error(ErrorCode::InputError, "--label is required");

    // Without cutoffs the covariate must already be coded 0/1.
    std::vector<std::optional<double>> thresholds;
    if (cutoffs.empty()) thresholds.push_back(std::nullopt);
    for (double t : cutoffs) thresholds.emplace_back(t);

    std::string table = "covariate,cutoff,n_group0,n_group1,statistic,p_value,permutations\n";
    json rows = json::array();
    bool converged = true;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
        std::vector<std::size_t> keep;
        std::vector<int> labels;
        for (std::size_t i = 0; i < e.size(); ++i) {
            const auto v = numeric_covariate(e.covariates[i], label);
            if (!v) continue;
            int l;
            if (thresholds[t]) {
                l = *v > *thresholds[t] ? 1 : 0;
            } else {
                if (*v != 0.0 && *v != 1.0)
                    throw Error(ErrorCode::InputError, "covariate '" + label + "' is not 0/1 for '" + e.ids[i] + "'; pass --cutoffs");
                l = static_cast<int>(*v);
            }
            keep.push_back(i);
            labels.push_back(l);
        }
        if (keep.empty()) throw Error(ErrorCode::InputError, "no shape has a numeric '" + label + "' covariate");
        PermutationOptions po;
        po.permutations = ctx.config.permutations;
        po.rng_seed = derive_seed(ctx.config.rng_seed, t);
        po.karcher = ctx.config.karcher_options();
        po.threads = ctx.config.threads;
        const PermutationTestResult r = permutation_test_mean_shape(e.subset(keep), labels, po);
        converged = converged && r.pooled_mean_converged;
        const std::string cut = thresholds[t] ? num(*thresholds[t]) : "";
        table += label + "," + cut + "," + std::to_string(r.group_sizes[0]) + "," + std::to_string(r.group_sizes[1]) + "," +
                 num(r.observed_statistic) + "," + num(r.p_value) + "," + std::to_string(r.permutations) + "\n";
        json row = {{"covariate", label},
                    {"n_group0", r.group_sizes[0]},
                    {"n_group1", r.group_sizes[1]},
                    {"statistic", r.observed_statistic},
                    {"p_value", r.p_value},
                    {"permutations", r.permutations},
                    {"rng_seed", r.rng_seed},
                    {"pooled_mean_converged", r.pooled_mean_converged}};
        row["cutoff"] = thresholds[t] ? json(*thresholds[t]) : json(nullptr);
        rows.push_back(row);
        std::cout << label << (cut.empty() ? "" : " > " + cut) << ": p = " << num(r.p_value) << "\n";
    }
    write_table(ctx, "permtest.csv", table);
    write_json(ctx, "permtest.json", {{"tests", rows}}, "permtest");
    if (!converged) throw NotConverged{"a pooled Karcher mean did not converge"};
    return 0;
}

int cmd_enrich(const Common& c, const std::string& labels_path, std::vector<std::string> names, std::optional<long> draws) {
    Context ctx = make_context(c);
    if (draws) {
        ctx.config.draws = *draws;
        ctx.config.validate();
        ctx.digest = config_digest(ctx.config);
    }
    if (c.manifest.empty()) throw Error(ErrorCode::InputError, "--manifest is required");
    if (labels_path.empty()) throw Error(ErrorCode::InputError, "--labels is required");
    const auto entries = io::read_manifest(c.manifest);
    const auto labels = read_labels(labels_path);
    ClusterAssignment assignment;
    std::vector<Covariates> covariates;
    std::set<int> seen;
    for (const auto& entry : entries) {
        const auto it = labels.find(entry.id);
        if (it == labels.end()) throw Error(ErrorCode::InputError, "id '" + entry.id + "' has no cluster label");
        assignment.labels.push_back(it->second);
        seen.insert(it->second);
        covariates.push_back(entry.covariates);
    }
    if (seen != std::set<int>{1, 2}) throw Error(ErrorCode::InputError, "enrichment needs cluster labels 1 and 2");
    assignment.k = 2;
    if (names.empty()) {
        std::set<std::string> all;
        for (const auto& cov : covariates)
            for (const auto& [key, value] : cov) all.insert(key);
        names.assign(all.begin(), all.end());
    }
    const EnrichmentScreen screen = enrichment_screen(assignment, covariates, names, ctx.config.draws, ctx.config.rng_seed, ctx.config.threads);

    std::string table = "covariate,y1,n1,y2,n2,probability,standard_error,flag\n";
    json rows = json::array();
    std::vector<double> values;
    std::vector<std::string> plot_names;
    for (const auto& r : screen.results) {
        table += r.covariate + "," + std::to_string(r.y1) + "," + std::to_string(r.n1) + "," + std::to_string(r.y2) + "," +
                 std::to_string(r.n2) + "," + num(r.probability) + "," + num(r.standard_error) + "," + r.flag + "\n";
        rows.push_back({{"covariate", r.covariate}, {"y1", r.y1}, {"n1", r.n1}, {"y2", r.y2}, {"n2", r.n2},
                        {"probability", r.probability}, {"standard_error", r.standard_error}, {"draws", r.draws},
                        {"rng_seed", r.rng_seed}, {"flag", r.flag}});
        values.push_back(r.probability);
        plot_names.push_back(r.covariate);
    }
    for (const auto& w : screen.warnings) std::cerr << "warning: " << w << "\n";
    write_table(ctx, "enrichment.csv", table);
    write_json(ctx, "enrichment.json", {{"results", rows}, {"warnings", screen.warnings}}, "enrich");
    io::write_text(ctx.out / "enrichment.svg", svg::line_plot(values, plot_names, {0.25, 0.75}));
    std::cout << screen.results.size() << " covariate codings screened\n";
    return 0;
}

int cmd_simulate(const Common& c, const std::string& model_path, int count) {
    const Context ctx = make_context(c);
    if (model_path.empty()) throw Error(ErrorCode::InputError, "--model is required");
    if (count < 0) throw Error(ErrorCode::InputError, "--count must be non-negative");
    json mj;
    try {
        mj = json::parse(io::read_text(model_path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InputError, "model '" + model_path + "': " + e.what());
    }
    const SpcaModel model = io::model_from_json(mj);
    if (count == 0) {
        std::cout << "count 0: nothing written\n";
        return 0;
    }
    const int kappa = std::min(model.rank(), std::max(model.positive_count, 0));
    json manifest = json::array();
    for (int i = 0; i < count; ++i) {
        const Srvf q = random_shape(model, derive_seed(ctx.config.rng_seed, static_cast<std::uint64_t>(i)), kappa);
        char name[32];
        std::snprintf(name, sizeof name, "sim_%04d", i);
        io::write_text(ctx.out / (std::string(name) + ".csv"), io::contour_csv(from_srvf(q).contour.points));
        manifest.push_back({{"id", name}, {"path", std::string(name) + ".csv"}});
    }
    io::write_text(ctx.out / "manifest.json", manifest.dump(2) + "\n");
    write_json(ctx, "simulate.json", {{"count", count}, {"directions", kappa}, {"m", model.mean.size()}}, "simulate");
    std::cout << "wrote " << count << " contours and manifest.json\n";
    return 0;
}

int cmd_loo(const Common& c) {
    const Context ctx = make_context(c);
    const io::LoadedEnsemble data = load(c, ctx);
    const ShapeEnsemble& e = data.ensemble;
    LooOptions lo;
    lo.karcher = ctx.config.karcher_options();
    const KarcherResult full = karcher_mean(e, lo.karcher);
    const ReconstructionReport r = loo_reconstruction(e, lo, &full);

    std::string table = "id,error\n";
    for (std::size_t i = 0; i < r.ids.size(); ++i) table += r.ids[i] + "," + num(r.per_shape_error[i]) + "\n";
    write_table(ctx, "loo_errors.csv", table);
    write_json(ctx, "loo.json",
               {{"n", r.ids.size()},
                {"mean", r.mean},
                {"std", r.std},
                {"median", r.median},
                {"median_absolute_deviation", r.median_absolute_deviation},
                {"ids", r.ids},
                {"per_shape_error", r.per_shape_error},
                {"full_mean_converged", full.converged}},
               "loo");

    std::vector<std::size_t> order(r.ids.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r.per_shape_error[a] < r.per_shape_error[b]; });
    std::vector<std::pair<Srvf, Srvf>> pairs;
    std::vector<std::string> captions;
    const std::pair<const char*, std::size_t> picks[] = {{"min", order.front()}, {"median", order[order.size() / 2]}, {"max", order.back()}};
    for (const auto& [tag, i] : picks) {
        pairs.emplace_back(r.truth[i], r.reconstruction[i]);
        captions.push_back(std::string(tag) + " " + r.ids[i] + "  E = " + svg::num(r.per_shape_error[i]));
    }
    io::write_text(ctx.out / "loo_overlays.svg", svg::overlays(pairs, captions));
    std::cout << "LOO median error " << num(r.median) << "\n";
    if (!full.converged) throw NotConverged{"full-data Karcher mean did not converge"};
    return 0;
}

int exit_code_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::ProjectionDiverged:
    case ErrorCode::GeodesicNotConverged:
    case ErrorCode::MeanNotConverged:
    case ErrorCode::AntipodalPair: return kExitNumerical;
    default: return kExitInput;
    }
}

void add_common(CLI::App* sub, Common& c, bool needs_manifest = true) {
    auto* opt = sub->add_option("--manifest", c.manifest, "JSON manifest of {id, path, covariates}");
    if (needs_manifest) opt->required();
    sub->add_option("--config", c.config, "flat JSON config merged over the defaults");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "RNG seed (overrides config rng_seed)");
    sub->add_option("--m", c.m, "samples per curve (overrides config m)");
    sub->add_option("--threads", c.threads, "worker threads, 0 = hardware concurrency");
    sub->add_option("--mode", c.mode, "distance pipeline")->check(CLI::IsMember({"elastic", "nonelastic"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Elastic shape analysis of closed planar contours"};
    app.require_subcommand(1);
    Common common;

    auto* distance_cmd = app.add_subcommand("distance", "pairwise shape distance matrix");
    add_common(distance_cmd, common);

    std::string id1, id2;
    auto* geodesic_cmd = app.add_subcommand("geodesic", "geodesic path between two shapes");
    add_common(geodesic_cmd, common);
    geodesic_cmd->add_option("--id1", id1)->required();
    geodesic_cmd->add_option("--id2", id2)->required();

    auto* mean_cmd = app.add_subcommand("mean-pca", "Karcher mean and tangent PCA");
    add_common(mean_cmd, common);

    std::optional<int> k;
    std::string survival = "survival";
    auto* cluster_cmd = app.add_subcommand("cluster", "complete-linkage clustering, MDS and cluster-wise PCA");
    add_common(cluster_cmd, common);
    cluster_cmd->add_option("--k", k, "cluster count (overrides config k_clusters)");
    cluster_cmd->add_option("--survival", survival, "numeric covariate summarised per cluster");

    std::string label;
    std::vector<double> cutoffs;
    std::optional<int> permutations;
    auto* perm_cmd = app.add_subcommand("permtest", "permutation test of equal mean shapes");
    add_common(perm_cmd, common);
    perm_cmd->add_option("--label", label, "covariate defining the two groups")->required();
    perm_cmd->add_option("--cutoffs", cutoffs, "dichotomise the covariate as value > cutoff");
    perm_cmd->add_option("--permutations", permutations, "permutation count (overrides config)");

    std::string labels_path;
    std::vector<std::string> names;
    std::optional<long> draws;
    auto* enrich_cmd = app.add_subcommand("enrich", "covariate enrichment between two clusters");
    add_common(enrich_cmd, common);
    enrich_cmd->add_option("--labels", labels_path, "labels.csv written by cluster")->required();
    enrich_cmd->add_option("--covariates", names, "covariates to screen (default: all)");
    enrich_cmd->add_option("--draws", draws, "Monte Carlo draws (overrides config)");

    std::string model_path;
    int count = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "sample contours from a fitted model");
    add_common(sim_cmd, common, false);
    sim_cmd->add_option("--model", model_path, "model.json written by mean-pca")->required();
    sim_cmd->add_option("--count", count, "number of shapes")->required();

    auto* loo_cmd = app.add_subcommand("loo", "leave-one-out reconstruction error");
    add_common(loo_cmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        if (*distance_cmd) return cmd_distance(common);
        if (*geodesic_cmd) return cmd_geodesic(common, id1, id2);
        if (*mean_cmd) return cmd_mean_pca(common);
        if (*cluster_cmd) return cmd_cluster(common, k, survival);
        if (*perm_cmd) return cmd_permtest(common, label, cutoffs, permutations);
        if (*enrich_cmd) return cmd_enrich(common, labels_path, names, draws);
        if (*sim_cmd) return cmd_simulate(common, model_path, count);
        if (*loo_cmd) return cmd_loo(common);
    } catch (const NotConverged& e) {
        std::cerr << "error: " << e.what << "\n";
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}
