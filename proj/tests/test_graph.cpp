#include <doctest.h>

#include <random>

#include "hse/error.hpp"
#include "hse/graph.hpp"
#include "oracles.hpp"

using namespace hse;

namespace {

Dataset from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Dataset ds;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto q = static_cast<Eigen::Index>(rows.begin()->size());
    ds.features.resize(n, q);
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) ds.features(i, j++) = v;
        ++i;
    }
    return ds;
}

Dataset random_dataset(std::uint64_t seed, int n, int q) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Dataset ds;
    ds.features.resize(n, q);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < q; ++j) ds.features(i, j) = g(rng);
    return ds;
}

void check_structure(const SimilarityGraph& g, int k) {
    g.validate();
    const oracle::Dense w = oracle::dense_weights(g);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        CHECK(w(i, i) == 0.0);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            CHECK(w(i, j) == w(j, i));
            CHECK(std::isfinite(w(i, j)));
            CHECK(w(i, j) >= 0.0);
        }
        CHECK(g.neighbors(static_cast<PointId>(i)).size() >= static_cast<std::size_t>(k));
    }
}

}  // namespace

TEST_CASE("knn on collinear points") {
    const Dataset ds = from_rows({{0}, {1}, {3}});
    const auto nn = knn_neighbors(ds.features, 1);
    CHECK(nn[0] == std::vector<PointId>{1});
    CHECK(nn[1] == std::vector<PointId>{0});
    CHECK(nn[2] == std::vector<PointId>{1});
}

TEST_CASE("knn on square corners excludes the diagonal") {
    const Dataset ds = from_rows({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const auto nn = knn_neighbors(ds.features, 2);
    auto sorted = [](std::vector<PointId> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    CHECK(sorted(nn[0]) == std::vector<PointId>{1, 3});
    CHECK(sorted(nn[1]) == std::vector<PointId>{0, 2});
    CHECK(sorted(nn[2]) == std::vector<PointId>{1, 3});
    CHECK(sorted(nn[3]) == std::vector<PointId>{0, 2});
}

TEST_CASE("knn matches exhaustive sort") {
    const Dataset ds = random_dataset(3, 50, 5);
    CHECK(knn_neighbors(ds.features, 10) == oracle::brute_knn(ds.features, 10));
    // Duplicated points force distance ties, which go to the lower id.
    Dataset dup = from_rows({{0}, {1}, {1}, {1}, {2}});
    CHECK(knn_neighbors(dup.features, 2) == oracle::brute_knn(dup.features, 2));
}

TEST_CASE("knn rejects k >= N") {
    const Dataset ds = from_rows({{0}, {1}, {2}});
    CHECK_THROWS_AS(knn_neighbors(ds.features, 3), ConfigError);
    CHECK_THROWS_AS(knn_neighbors(ds.features, 0), ConfigError);
}

TEST_CASE("calibration with equidistant neighbours") {
    const std::vector<double> two{4.0, 4.0};
    const Calibration c = calibrate_gamma(two, 2.0);
    CHECK(c.converged);
    CHECK(std::exp2(oracle::log2_perplexity(two, c.gamma)) == doctest::Approx(2.0).epsilon(1e-9));
    const std::vector<double> seven(7, 2.5);
    for (double gamma : {0.01, 1.0, 100.0})
        CHECK(oracle::log2_perplexity(seven, gamma) == doctest::Approx(std::log2(7.0)).epsilon(1e-12));
    CHECK(calibrate_gamma(seven, 7.0).converged);
}

TEST_CASE("calibration reaches the target on gaussian samples") {
    const Dataset ds = random_dataset(17, 101, 3);
    std::vector<double> d2;
    for (Eigen::Index j = 1; j < 101; ++j) d2.push_back(oracle::sqdist(ds.features, 0, j));
    const Calibration c = calibrate_gamma(d2, 30.0);
    CHECK(c.converged);
    CHECK(c.iterations <= kCalibrationMaxIterations);
    CHECK(std::abs(oracle::log2_perplexity(d2, c.gamma) - std::log2(30.0)) <= 1e-5);
}

TEST_CASE("calibration preconditions") {
    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(calibrate_gamma(one, 1.0), ConfigError);
    const std::vector<double> three{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(calibrate_gamma(three, 4.0), ConfigError);
}

TEST_CASE("perplexity is strictly decreasing in gamma") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> d2(12);
        for (double& d : d2) d = u(rng);
        double prev = std::numeric_limits<double>::infinity();
        for (double lg = -3.0; lg <= 1.0; lg += 0.25) {
            const double h = oracle::log2_perplexity(d2, std::pow(10.0, lg));
            CHECK(h < prev);
            prev = h;
        }
    }
}

TEST_CASE("perplexity graph preconditions") {
    const Dataset two = from_rows({{0}, {1}});
    CHECK_THROWS_AS(build_perplexity_graph(two, 1, 1.0), ConfigError);
    const Dataset five = random_dataset(1, 5, 2);
    CHECK_THROWS_AS(build_perplexity_graph(five, 10, 2.0), ConfigError);
    CHECK_THROWS_AS(build_perplexity_graph(five, 2, 30.0), ConfigError);
}

TEST_CASE("equidistant triangle gives equal weights") {
    const double h = std::sqrt(3.0) / 2.0;
    const Dataset ds = from_rows({{0, 0}, {1, 0}, {0.5, h}});
    const SimilarityGraph g = build_perplexity_graph(ds, 2, 2.0);
    const auto e = g.edges();
    REQUIRE(e.size() == 3);
    CHECK(e[0].weight == doctest::Approx(e[1].weight).epsilon(1e-12));
    CHECK(e[1].weight == doctest::Approx(e[2].weight).epsilon(1e-12));
    CHECK(e[0].weight == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("perplexity graph matches the dense reference") {
    const Dataset ds = random_dataset(40, 40, 4);
    const SimilarityGraph g = build_perplexity_graph(ds, 10, 30.0);
    check_structure(g, 10);
    const oracle::Dense ref = oracle::perplexity_reference(ds.features, 10, g.gammas());
    CHECK((oracle::dense_weights(g) - ref).cwiseAbs().maxCoeff() <= 1e-12);
    // Every stored bandwidth reaches the perplexity over all other points.
    int within = 0;
    for (Eigen::Index i = 0; i < 40; ++i) {
        std::vector<double> d2;
        for (Eigen::Index j = 0; j < 40; ++j)
            if (j != i) d2.push_back(oracle::sqdist(ds.features, i, j));
        within += std::abs(oracle::log2_perplexity(d2, g.gammas()[static_cast<std::size_t>(i)]) - std::log2(30.0)) <= 1e-4;
    }
    CHECK(within >= 40 * 99 / 100);
    CHECK(g.flagged().empty());
}

TEST_CASE("calibration over the neighbourhood only") {
    const Dataset ds = random_dataset(8, 30, 3);
    const SimilarityGraph g = build_perplexity_graph(ds, 10, 5.0, CalibrationScope::neighbors_only);
    check_structure(g, 10);
    CHECK_THROWS_AS(build_perplexity_graph(ds, 10, 30.0, CalibrationScope::neighbors_only), ConfigError);
}

TEST_CASE("baseline graphs match the dense reference") {
    const Dataset ds = random_dataset(9, 40, 3);
    for (GraphKind kind : {GraphKind::mean, GraphKind::binary, GraphKind::knn}) {
        CAPTURE(to_string(kind));
        const SimilarityGraph g = build_baseline_graph(ds, 10, kind);
        check_structure(g, 10);
        const oracle::Dense ref = oracle::baseline_reference(ds.features, 10, kind);
        CHECK((oracle::dense_weights(g) - ref).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("binary weights are exactly one") {
    const Dataset ds = random_dataset(10, 25, 2);
    for (const Edge& e : build_baseline_graph(ds, 4, GraphKind::binary).edges()) CHECK(e.weight == 1.0);
}

TEST_CASE("mean graph on an equilateral triangle") {
    const double h = std::sqrt(3.0) / 2.0;
    const Dataset ds = from_rows({{0, 0}, {1, 0}, {0.5, h}});
    for (const Edge& e : build_baseline_graph(ds, 2, GraphKind::mean).edges())
        CHECK(e.weight == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("knn bandwidths are larger in the tight cluster") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Dataset ds;
    ds.features.resize(40, 2);
    for (Eigen::Index i = 0; i < 40; ++i) {
        const double scale = i < 20 ? 0.1 : 3.0;
        ds.features(i, 0) = (i < 20 ? 0.0 : 100.0) + scale * g(rng);
        ds.features(i, 1) = scale * g(rng);
    }
    const SimilarityGraph graph = build_baseline_graph(ds, 5, GraphKind::knn);
    const auto& gamma = graph.gammas();
    const double tight_min = *std::min_element(gamma.begin(), gamma.begin() + 20);
    const double loose_max = *std::max_element(gamma.begin() + 20, gamma.end());
    CHECK(tight_min > loose_max);
}

TEST_CASE("graph construction is deterministic") {
    const Dataset ds = random_dataset(12, 60, 3);
    for (GraphKind kind : {GraphKind::perplexity, GraphKind::mean, GraphKind::binary, GraphKind::knn}) {
        const GraphOptions o{kind, 6, 20.0, CalibrationScope::all_points};
        const auto a = build_graph(ds, o).edges();
        const auto b = build_graph(ds, o).edges();
        REQUIRE(a.size() == b.size());
        for (std::size_t m = 0; m < a.size(); ++m) {
            CHECK(a[m].i == b[m].i);
            CHECK(a[m].j == b[m].j);
            CHECK(a[m].weight == b[m].weight);
        }
    }
}

TEST_CASE("graph kind names") {
    CHECK(graph_kind_from_string("per") == GraphKind::perplexity);
    CHECK(graph_kind_from_string("knn") == GraphKind::knn);
    CHECK_THROWS_AS(graph_kind_from_string("lle"), ConfigError);
}

TEST_CASE("from_edges rejects bad input") {
    const std::vector<Edge> loop{{0, 0, 1.0}};
    CHECK_THROWS_AS(SimilarityGraph::from_edges(2, loop), ValidationError);
    const std::vector<Edge> neg{{0, 1, -1.0}};
    CHECK_THROWS_AS(SimilarityGraph::from_edges(2, neg), ValidationError);
    const std::vector<Edge> dup{{0, 1, 1.0}, {1, 0, 1.0}};
    CHECK_THROWS_AS(SimilarityGraph::from_edges(2, dup), ValidationError);
}

TEST_CASE("graph json export") {
    const std::vector<Edge> e{{1, 0, 0.25}};
    const std::string json = graph_to_json(SimilarityGraph::from_edges(2, e));
    CHECK(json.find("\"n\":2") != std::string::npos);
    CHECK(json.find("[0,1,0.25]") != std::string::npos);
}
