// Clusters a tight and a diffuse group of shapes, prints the MDS layout and
// the cluster-wise total variances.
//
//   demo_two_clusters [mds.svg]

#include "elastic/elastic.hpp"

#include <iostream>
#include <random>

using namespace elastic;

int main(int argc, char** argv) {
    const Eigen::Index m = 64;
    std::mt19937_64 rng(5);
    ShapeEnsemble e;
    const double spread[2] = {0.0004, 0.004};
    for (int g = 0; g < 2; ++g) {
        const Srvf centre = to_srvf(synthetic::peaked_curve(g + 2, 0.25).sample(4 * m), m);
        const SpcaModel model = synthetic::planted_model(centre, {spread[g], spread[g] / 2}, 20 + g);
        const ShapeEnsemble part = synthetic::sample_ensemble(model, 8, 30 + g, g ? "diffuse" : "tight");
        for (std::size_t i = 0; i < part.size(); ++i) e.add(part.shapes[i], part.ids[i]);
    }
    const DistanceMatrix d = pairwise_distance_matrix(e, DistanceMode::Elastic);
    const ClusterAssignment a = hierarchical_cluster(d.values, 2);
    const MdsResult mds = classical_mds(d.values, 2);
    for (std::size_t i = 0; i < e.size(); ++i)
        std::cout << e.ids[i] << "  cluster " << a.labels[i] << "  (" << mds.coordinates(static_cast<Eigen::Index>(i), 0) << ", "
                  << mds.coordinates(static_cast<Eigen::Index>(i), 1) << ")\n";
    for (int g = 1; g <= 2; ++g) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < e.size(); ++i)
            if (a.labels[i] == g) members.push_back(i);
        const KarcherResult fit = karcher_mean(e.subset(members));
        std::cout << "cluster " << g << ": " << members.size() << " shapes, total variance "
                  << covariance_and_spca(fit.mean, fit.shooting).total_variance << "\n";
    }
    const std::string path = argc > 1 ? argv[1] : "two_clusters_mds.svg";
    io::write_text(path, svg::scatter(mds.coordinates, a.labels, e.ids));
    std::cout << "wrote " << path << "\n";
}
