#pragma once

#include "elastic/core.hpp"

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace elastic {

using CovariateValue = std::variant<double, std::string>;
using Covariates = std::map<std::string, CovariateValue>;

/// Shapes on a common grid, with unique ids and optional per-shape covariates.
struct ShapeEnsemble {
    std::vector<Srvf> shapes;
    std::vector<std::string> ids;
    std::vector<Covariates> covariates;

    std::size_t size() const { return shapes.size(); }
    Eigen::Index m() const { return shapes.empty() ? 0 : shapes.front().size(); }

    void add(Srvf q, std::string id, Covariates cov = {}) {
        shapes.push_back(std::move(q));
        ids.push_back(std::move(id));
        covariates.push_back(std::move(cov));
    }

    void validate() const {
        if (shapes.empty()) throw Error(ErrorCode::InvalidArgument, "ensemble is empty");
        if (ids.size() != shapes.size()) throw Error(ErrorCode::InvalidArgument, "ids and shapes differ in count");
        if (!covariates.empty() && covariates.size() != shapes.size())
            throw Error(ErrorCode::InvalidArgument, "covariates and shapes differ in count");
        std::set<std::string> seen;
        for (std::size_t i = 0; i < shapes.size(); ++i) {
            if (shapes[i].size() != m()) throw Error(ErrorCode::InvalidArgument, "shape '" + ids[i] + "' has a different m");
            if (!seen.insert(ids[i]).second) throw Error(ErrorCode::InvalidArgument, "duplicate id '" + ids[i] + "'");
        }
    }

    /// Sub-ensemble with the given member indices, in that order.
    ShapeEnsemble subset(const std::vector<std::size_t>& idx) const {
        ShapeEnsemble out;
        for (std::size_t i : idx)
            out.add(shapes[i], ids[i], covariates.empty() ? Covariates{} : covariates[i]);
        return out;
    }
};

} // namespace elastic
