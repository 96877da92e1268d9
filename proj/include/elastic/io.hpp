#pragma once

// File formats: contour CSV, JSON manifests, distance matrices, shape models.

#include "elastic/contour.hpp"
#include "elastic/core.hpp"
#include "elastic/ensemble.hpp"
#include "elastic/registration.hpp"
#include "elastic/shapestats.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace elastic::io {

/// Shortest round-trip decimal form; identical bytes for identical doubles.
inline std::string format_number(double v) {
    char buf[32];
    for (int precision = 15; precision <= 17; ++precision) {
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::InputError, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::InputError, "cannot write '" + path.string() + "'");
    out << text;
}

/// Two numeric columns; an optional non-numeric header line (e.g. "x,y") is skipped.
inline Field read_contour_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    std::vector<double> xs, ys;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw Error(ErrorCode::InputError, path.string() + ":" + std::to_string(lineno) + ": expected x,y");
        char* end = nullptr;
        const std::string a = line.substr(0, comma);
        const std::string b = line.substr(comma + 1);
        const double x = std::strtod(a.c_str(), &end);
        const bool ok_x = end != a.c_str();
        const double y = std::strtod(b.c_str(), &end);
        const bool ok_y = end != b.c_str();
        if (!ok_x || !ok_y) {
            if (xs.empty() && lineno == 1) continue;
            throw Error(ErrorCode::InputError, path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
        }
        xs.push_back(x);
        ys.push_back(y);
    }
    Field p(static_cast<Eigen::Index>(xs.size()), 2);
    for (std::size_t i = 0; i < xs.size(); ++i) p.row(static_cast<Eigen::Index>(i)) << xs[i], ys[i];
    return p;
}

inline std::string contour_csv(const Field& p) {
    std::string s = "x,y\n";
    for (Eigen::Index i = 0; i < p.rows(); ++i) s += format_number(p(i, 0)) + "," + format_number(p(i, 1)) + "\n";
    return s;
}

struct ManifestEntry {
    std::string id;
    std::filesystem::path path;
    Covariates covariates;
};

inline CovariateValue covariate_from_json(const std::string& id, const std::string& key, const nlohmann::json& v) {
    if (v.is_number()) return v.get<double>();
    if (v.is_boolean()) return v.get<bool>() ? 1.0 : 0.0;
    if (v.is_string()) return v.get<std::string>();
    throw Error(ErrorCode::InputError, "shape '" + id + "': covariate '" + key + "' must be a number, boolean or string");
}

inline nlohmann::json covariate_to_json(const CovariateValue& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    return std::get<std::string>(v);
}

/// JSON array of {id, path, covariates?}; relative paths resolve against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InputError, "manifest '" + path.string() + "': " + e.what());
    }
    if (!j.is_array()) throw Error(ErrorCode::InputError, "manifest must be a JSON array");
    std::vector<ManifestEntry> out;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("id") || !item.contains("path") || !item["id"].is_string() ||
            !item["path"].is_string())
            throw Error(ErrorCode::InputError, "manifest entries need string 'id' and 'path'");
        ManifestEntry e;
        e.id = item["id"].get<std::string>();
        e.path = item["path"].get<std::string>();
        if (e.path.is_relative()) e.path = path.parent_path() / e.path;
        if (item.contains("covariates")) {
            if (!item["covariates"].is_object()) throw Error(ErrorCode::InputError, "shape '" + e.id + "': covariates must be an object");
            for (const auto& [k, v] : item["covariates"].items()) e.covariates[k] = covariate_from_json(e.id, k, v);
        }
        out.push_back(std::move(e));
    }
    return out;
}

struct LoadedEnsemble {
    ShapeEnsemble ensemble;
    std::vector<Contour> contours;
};

/// Reads and converts every manifest entry; all failing ids are reported together.
inline LoadedEnsemble load_ensemble(const std::filesystem::path& manifest, Eigen::Index m,
                                    const ProjectionOptions& proj = {}) {
    const auto entries = read_manifest(manifest);
    LoadedEnsemble out;
    std::string failures;
    for (const auto& e : entries) {
        try {
            Contour c = validate_and_normalize(read_contour_csv(e.path), e.id);
            out.ensemble.add(to_srvf(c, m, proj), e.id, e.covariates);
            out.contours.push_back(std::move(c));
        } catch (const Error& err) {
            failures += (failures.empty() ? "" : "; ") + e.id + ": " + err.what();
        }
    }
    if (!failures.empty()) throw Error(ErrorCode::InputError, failures);
    if (entries.empty()) throw Error(ErrorCode::InputError, "manifest lists no shapes");
    out.ensemble.validate();
    return out;
}

inline std::string matrix_csv(const Eigen::MatrixXd& d, const std::vector<std::string>& ids) {
    std::string s = "id";
    for (const auto& id : ids) s += "," + id;
    s += "\n";
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        s += ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < d.cols(); ++j) s += "," + format_number(d(i, j));
        s += "\n";
    }
    return s;
}

inline nlohmann::json field_to_json(const Field& f) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < f.rows(); ++i) a.push_back({f(i, 0), f(i, 1)});
    return a;
}

inline Field field_from_json(const nlohmann::json& a) {
    if (!a.is_array()) throw Error(ErrorCode::InputError, "expected an array of [x, y] pairs");
    Field f(static_cast<Eigen::Index>(a.size()), 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_array() || a[i].size() != 2) throw Error(ErrorCode::InputError, "expected [x, y] pairs");
        f(static_cast<Eigen::Index>(i), 0) = a[i][0].get<double>();
        f(static_cast<Eigen::Index>(i), 1) = a[i][1].get<double>();
    }
    return f;
}

inline nlohmann::json model_to_json(const SpcaModel& model) {
    nlohmann::json j;
    j["m"] = model.mean.size();
    j["mean"] = field_to_json(model.mean.samples);
    j["eigenvalues"] = std::vector<double>(model.eigenvalues.data(), model.eigenvalues.data() + model.eigenvalues.size());
    j["positive_count"] = model.positive_count;
    j["total_variance"] = model.total_variance;
    nlohmann::json vecs = nlohmann::json::array();
    for (const auto& u : model.eigenvectors) vecs.push_back(field_to_json(u.samples));
    j["eigenvectors"] = vecs;
    j["ids"] = model.ids;
    nlohmann::json coef = nlohmann::json::array();
    for (Eigen::Index i = 0; i < model.coefficients.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(model.coefficients.cols()));
        for (Eigen::Index c = 0; c < model.coefficients.cols(); ++c) row[static_cast<std::size_t>(c)] = model.coefficients(i, c);
        coef.push_back(row);
    }
    j["coefficients"] = coef;
    return j;
}

/// Restores the fields needed for simulation and projection; shooting vectors are not stored.
inline SpcaModel model_from_json(const nlohmann::json& j) {
    try {
        SpcaModel model;
        model.mean = Srvf(field_from_json(j.at("mean")));
        const auto ev = j.at("eigenvalues").get<std::vector<double>>();
        model.eigenvalues = Eigen::Map<const Eigen::VectorXd>(ev.data(), static_cast<Eigen::Index>(ev.size()));
        for (const auto& u : j.at("eigenvectors")) model.eigenvectors.emplace_back(field_from_json(u));
        if (model.eigenvectors.size() != ev.size()) throw Error(ErrorCode::InputError, "model: eigenvector count mismatch");
        for (const auto& u : model.eigenvectors)
            if (u.size() != model.mean.size()) throw Error(ErrorCode::InputError, "model: eigenvector length mismatch");
        model.positive_count = j.value("positive_count", static_cast<int>(ev.size()));
        model.total_variance = j.value("total_variance", model.eigenvalues.sum());
        model.ids = j.value("ids", std::vector<std::string>{});
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InputError, std::string("model: ") + e.what());
    }
}

inline std::string coefficients_csv(const SpcaModel& model) {
    std::string s = "id";
    for (Eigen::Index c = 0; c < model.coefficients.cols(); ++c) s += ",PC" + std::to_string(c + 1);
    s += "\n";
    for (Eigen::Index i = 0; i < model.coefficients.rows(); ++i) {
        s += i < static_cast<Eigen::Index>(model.ids.size()) ? model.ids[static_cast<std::size_t>(i)] : std::to_string(i);
        for (Eigen::Index c = 0; c < model.coefficients.cols(); ++c) s += "," + format_number(model.coefficients(i, c));
        s += "\n";
    }
    return s;
}

} // namespace elastic::io
