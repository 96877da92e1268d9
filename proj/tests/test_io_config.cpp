#include "support.hpp"

#include "elastic/config.hpp"
#include "elastic/io.hpp"
#include "elastic/svg.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace elastic;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        path_ = fs::temp_directory_path() / (std::string("elastic_io_") + info->test_suite_name() + "_" + info->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

} // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    const AnalysisConfig c = config_from_json(nlohmann::json::object());
    EXPECT_EQ(c.m, 128);
    EXPECT_EQ(c.waypoints, 7);
    EXPECT_EQ(c.permutations, 1000);
    EXPECT_EQ(c.draws, 100000);
}

TEST(Config, RoundTripsThroughJson) {
    AnalysisConfig c;
    c.m = 64;
    c.seed_stride = 8;
    c.slope_set = "narrow";
    c.geodesic_tol = 3.5e-7;
    c.rng_seed = 123456789012345ULL;
    c.output_dir = "out/x";
    const nlohmann::json j = c;
    const AnalysisConfig back = config_from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(nlohmann::json(back), j);
    EXPECT_EQ(back.geodesic_tol, c.geodesic_tol);
    EXPECT_EQ(back.rng_seed, c.rng_seed);
}

TEST(Config, RejectsUnknownKeysAndInvalidValues) {
    EXPECT_THROW(config_from_json({{"mm", 64}}), Error);
    EXPECT_THROW(config_from_json({{"m", 16}}), Error);
    EXPECT_THROW(config_from_json({{"m", 64}, {"seed_stride", 7}}), Error);
    EXPECT_THROW(config_from_json({{"geodesic_tol", 0.0}}), Error);
    EXPECT_THROW(config_from_json({{"slope_set", "wide"}}), Error);
    EXPECT_THROW(config_from_json({{"draws", 10}}), Error);
    EXPECT_THROW(config_from_json({{"m", "many"}}), Error);
    EXPECT_THROW(config_from_json(nlohmann::json::array()), Error);
    try {
        config_from_json({{"waypoints", 3}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InputError);
    }
}

TEST(Config, DigestTracksResultAffectingFieldsOnly) {
    AnalysisConfig a;
    AnalysisConfig b;
    b.output_dir = "elsewhere";
    b.threads = 3;
    EXPECT_EQ(config_digest(a), config_digest(b));
    EXPECT_EQ(config_digest(a).size(), 16u);
    b.m = 64;
    EXPECT_NE(config_digest(a), config_digest(b));
    AnalysisConfig c;
    c.rng_seed = 1;
    EXPECT_NE(config_digest(a), config_digest(c));
}

TEST(Config, OptionsCarryConfiguredValues) {
    AnalysisConfig c;
    c.waypoints = 9;
    c.slope_set = "narrow";
    c.mean_step = 0.25;
    const KarcherOptions k = c.karcher_options();
    EXPECT_EQ(k.distance.geodesic.waypoints, 9);
    EXPECT_EQ(k.distance.registration.slopes.size(), 3u);
    EXPECT_EQ(k.step, 0.25);
}

TEST(Io, FormatNumberRoundTrips) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<double>(i % 20) - 10.0);
        EXPECT_EQ(std::strtod(io::format_number(v).c_str(), nullptr), v);
    }
    EXPECT_EQ(io::format_number(0.5), "0.5");
    EXPECT_EQ(io::format_number(3.0), "3");
}

TEST(Io, ReadsContourCsvWithHeaderAndCrlf) {
    TempDir dir;
    io::write_text(dir.path() / "c.csv", "x,y\r\n0,0\r\n1,0\r\n\r\n1, 1\r\n0,1\r\n");
    const Field p = io::read_contour_csv(dir.path() / "c.csv");
    ASSERT_EQ(p.rows(), 4);
    EXPECT_EQ(p(2, 1), 1.0);
    EXPECT_EQ(p(3, 0), 0.0);
}

TEST(Io, ContourCsvRoundTripsExactly) {
    TempDir dir;
    const Field p = elastic::testing::ellipse(2.0, 1.0, 17).points;
    io::write_text(dir.path() / "e.csv", io::contour_csv(p));
    EXPECT_EQ(elastic::testing::max_abs(io::read_contour_csv(dir.path() / "e.csv") - p), 0.0);
}

TEST(Io, RejectsMalformedCsv) {
    TempDir dir;
    io::write_text(dir.path() / "bad.csv", "0,0\n1\n");
    EXPECT_THROW(io::read_contour_csv(dir.path() / "bad.csv"), Error);
    io::write_text(dir.path() / "bad2.csv", "0,0\nx,1\n");
    EXPECT_THROW(io::read_contour_csv(dir.path() / "bad2.csv"), Error);
    EXPECT_THROW(io::read_contour_csv(dir.path() / "missing.csv"), Error);
}

TEST(Io, ManifestResolvesPathsAndCovariates) {
    TempDir dir;
    fs::create_directories(dir.path() / "shapes");
    for (const char* id : {"a", "b"})
        io::write_text(dir.path() / "shapes" / (std::string(id) + ".csv"), io::contour_csv(elastic::testing::ellipse(2.0, 1.0, 40).points));
    io::write_text(dir.path() / "m.json", R"([
        {"id": "a", "path": "shapes/a.csv", "covariates": {"survival": 12.5, "subtype": "x", "flag": true}},
        {"id": "b", "path": "shapes/b.csv"}
    ])");
    const auto entries = io::read_manifest(dir.path() / "m.json");
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].path, dir.path() / "shapes/a.csv");
    EXPECT_EQ(std::get<double>(entries[0].covariates.at("survival")), 12.5);
    EXPECT_EQ(std::get<std::string>(entries[0].covariates.at("subtype")), "x");
    EXPECT_EQ(std::get<double>(entries[0].covariates.at("flag")), 1.0);
    const auto loaded = io::load_ensemble(dir.path() / "m.json", 64);
    EXPECT_EQ(loaded.ensemble.size(), 2u);
    EXPECT_EQ(loaded.ensemble.m(), 64);
}

TEST(Io, LoadEnsembleNamesEveryFailingId) {
    TempDir dir;
    io::write_text(dir.path() / "ok.csv", io::contour_csv(elastic::testing::ellipse(2.0, 1.0, 40).points));
    io::write_text(dir.path() / "short.csv", "0,0\n1,0\n1,1\n");
    io::write_text(dir.path() / "m.json", R"([
        {"id": "good", "path": "ok.csv"},
        {"id": "gone", "path": "nope.csv"},
        {"id": "tiny", "path": "short.csv"}
    ])");
    try {
        io::load_ensemble(dir.path() / "m.json", 64);
        FAIL();
    } catch (const Error& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("gone"), std::string::npos);
        EXPECT_NE(what.find("tiny"), std::string::npos);
        EXPECT_EQ(what.find("good"), std::string::npos);
    }
}

TEST(Io, RejectsMalformedManifest) {
    TempDir dir;
    io::write_text(dir.path() / "a.json", R"({"id": "a"})");
    EXPECT_THROW(io::read_manifest(dir.path() / "a.json"), Error);
    io::write_text(dir.path() / "b.json", R"([{"id": "a"}])");
    EXPECT_THROW(io::read_manifest(dir.path() / "b.json"), Error);
    io::write_text(dir.path() / "c.json", "[");
    EXPECT_THROW(io::read_manifest(dir.path() / "c.json"), Error);
    io::write_text(dir.path() / "d.json", R"([{"id": "a", "path": "x.csv", "covariates": {"k": [1]}}])");
    EXPECT_THROW(io::read_manifest(dir.path() / "d.json"), Error);
}

TEST(Io, MatrixCsvHasIdHeaderAndRows) {
    Eigen::MatrixXd d(2, 2);
    d << 0, 0.25, 0.25, 0;
    EXPECT_EQ(io::matrix_csv(d, {"p", "q"}), "id,p,q\np,0,0.25\nq,0.25,0\n");
}

TEST(Io, ModelJsonRoundTrips) {
    std::mt19937_64 rng(2);
    const Srvf mu = elastic::testing::random_srvf(rng, 32);
    SpcaModel model = synthetic::planted_model(mu, {0.02, 0.01}, 4);
    model.coefficients = Eigen::MatrixXd::Constant(3, 2, 0.1);
    model.ids = {"a", "b", "c"};
    const SpcaModel back = io::model_from_json(nlohmann::json::parse(io::model_to_json(model).dump()));
    EXPECT_EQ(elastic::testing::max_abs(back.mean.samples - model.mean.samples), 0.0);
    EXPECT_EQ(back.eigenvalues, model.eigenvalues);
    ASSERT_EQ(back.eigenvectors.size(), 2u);
    EXPECT_EQ(elastic::testing::max_abs(back.eigenvectors[1].samples - model.eigenvectors[1].samples), 0.0);
    EXPECT_EQ(back.ids, model.ids);
    EXPECT_EQ(io::coefficients_csv(model).substr(0, 11), "id,PC1,PC2\n");
    nlohmann::json broken = io::model_to_json(model);
    broken["eigenvalues"].push_back(0.001);
    EXPECT_THROW(io::model_from_json(broken), Error);
}

TEST(Svg, ProducesOneOutlinePerShape) {
    std::mt19937_64 rng(3);
    std::vector<Srvf> row;
    for (int i = 0; i < 4; ++i) row.push_back(elastic::testing::random_srvf(rng, 32));
    const std::string s = svg::shape_rows({row, row}, {"first & <second>", "b"});
    EXPECT_EQ(s.rfind("<svg", 0), 0u);
    EXPECT_EQ(count_of(s, "<polygon"), 8u);
    EXPECT_NE(s.find("first &amp; &lt;second&gt;"), std::string::npos);
    EXPECT_EQ(count_of(svg::overlays({{row[0], row[1]}}, {"x"}), "<polygon"), 2u);
    Eigen::MatrixXd xy(3, 2);
    xy << 0, 0, 1, 0, 0, 1;
    EXPECT_EQ(count_of(svg::scatter(xy, {1, 2, 1}, {"a", "b", "c"}), "<circle"), 3u);
    EXPECT_EQ(count_of(svg::line_plot({0.9, 0.1}, {"u", "v"}, {0.25, 0.75}), "<circle"), 2u);
}
