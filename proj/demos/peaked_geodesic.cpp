// Three-bump versus two-bump curve: the elastic geodesic matches features,
// so it is shorter than the rigid-plus-seed (nonelastic) one.
//
//   demo_peaked_geodesic [out.svg]

#include "elastic/elastic.hpp"

#include <iostream>

using namespace elastic;

int main(int argc, char** argv) {
    const Eigen::Index m = 128;
    const Srvf q1 = to_srvf(synthetic::peaked_curve(3, 0.3).sample(400, "three"), m);
    const Srvf q2 = to_srvf(synthetic::peaked_curve(2, 0.3).sample(400, "two"), m);

    std::vector<std::vector<Srvf>> rows;
    std::vector<std::string> captions;
    for (DistanceMode mode : {DistanceMode::Elastic, DistanceMode::Nonelastic}) {
        const ShapeDistance d = distance(q1, q2, mode);
        std::cout << to_string(mode) << " distance: " << d.distance << "\n";
        std::vector<Srvf> row;
        for (const Field& w : d.path.waypoints) row.emplace_back(w);
        rows.push_back(row);
        captions.push_back(std::string(to_string(mode)) + "  d = " + svg::num(d.distance));
    }
    const std::string path = argc > 1 ? argv[1] : "peaked_geodesic.svg";
    io::write_text(path, svg::shape_rows(rows, captions));
    std::cout << "wrote " << path << "\n";
}
