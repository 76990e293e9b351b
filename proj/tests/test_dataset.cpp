#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "hse/dataset.hpp"
#include "hse/error.hpp"

using namespace hse;

TEST_CASE("minimal two-point file") {
    const Dataset ds = parse_csv("f0,f1,label\n0,0,0\n1,1,1\n");
    CHECK(ds.size() == 2);
    CHECK(ds.dims() == 2);
    CHECK(ds.class_count == 2);
    REQUIRE(ds.has_labels());
    CHECK((*ds.labels)[1] == 1);
    CHECK(ds.features(1, 0) == 1.0);
}

TEST_CASE("glass file has the expected shape") {
    const Dataset ds = load_csv(HSE_TEST_DATA "/glass.csv");
    CHECK(ds.size() == 214);
    CHECK(ds.dims() == 10);
    CHECK(ds.class_count == 6);
    CHECK(ds.name == "glass");
}

TEST_CASE("non-numeric feature names its row") {
    try {
        parse_csv("f0,f1,label\n1,2,oops\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.row() == 2);
        CHECK(std::string(e.what()).find("row 2") != std::string::npos);
    }
}

TEST_CASE("malformed rows and labels") {
    CHECK_THROWS_AS(parse_csv("f0,f1\n1\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("f0,label\n1,0\n2,x\n"), ParseError);
    CHECK_THROWS_AS(parse_csv("f0,label\n1,0\n2,-1\n"), ValidationError);
    CHECK_THROWS_AS(parse_csv("f0,label\n1,0\n2,5\n", CsvOptions{.class_count = 3}), ValidationError);
    CHECK_THROWS_AS(parse_csv("f0\n"), Error);
}

TEST_CASE("label and asset columns are not features") {
    const Dataset ds = parse_csv("asset,x,label,y\nimg/a.png,1,0,2\nimg/b.png,3,1,4\n");
    CHECK(ds.dims() == 2);
    CHECK(ds.features(1, 1) == 4.0);
    REQUIRE(ds.assets.has_value());
    CHECK((*ds.assets)[0] == "img/a.png");
}

TEST_CASE("unlabeled pool") {
    const Dataset ds = parse_csv("x,y\n1,2\n3,4\n5,6\n");
    CHECK_FALSE(ds.has_labels());
    CHECK(ds.size() == 3);
}

TEST_CASE("class count override and sidecar") {
    Dataset ds = parse_csv("x,label\n0,0\n1,1\n", CsvOptions{.class_count = 4});
    CHECK(ds.class_count == 4);
    apply_sidecar(ds, R"({"class_names": ["a","b","c","d","e"], "name": "demo"})");
    CHECK(ds.class_count == 5);
    CHECK(ds.name == "demo");
    CHECK(ds.class_names.at(4) == "e");
}

TEST_CASE("split_state examples") {
    const std::vector<PointId> l13{3, 1};
    auto p = split_state(5, l13);
    CHECK(p.labeled == std::vector<PointId>{1, 3});
    CHECK(p.unlabeled == std::vector<PointId>{0, 2, 4});
    p = split_state(3, {});
    CHECK(p.labeled.empty());
    CHECK(p.unlabeled == std::vector<PointId>{0, 1, 2});
    const std::vector<PointId> all{0, 1, 2};
    p = split_state(3, all);
    CHECK(p.labeled == all);
    CHECK(p.unlabeled.empty());
    const std::vector<PointId> bad{3};
    CHECK_THROWS_AS(split_state(3, bad), ValidationError);
}

TEST_CASE("split_state parts partition the pool") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        std::vector<PointId> labeled;
        for (std::size_t i = 0; i < n; ++i)
            if (rng() % 3 == 0) labeled.push_back(static_cast<PointId>(i));
        std::shuffle(labeled.begin(), labeled.end(), rng);
        const auto p = split_state(n, labeled);
        std::vector<int> seen(n, 0);
        for (PointId i : p.labeled) ++seen[static_cast<std::size_t>(i)];
        for (PointId i : p.unlabeled) ++seen[static_cast<std::size_t>(i)];
        CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
        CHECK(std::is_sorted(p.labeled.begin(), p.labeled.end()));
        CHECK(std::is_sorted(p.unlabeled.begin(), p.unlabeled.end()));
        CHECK(p.labeled.size() == labeled.size());
    }
}

TEST_CASE("csv round trip is bit exact") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1e3);
    Dataset ds;
    ds.features.resize(30, 4);
    for (Eigen::Index i = 0; i < 30; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) ds.features(i, j) = g(rng) * std::exp(g(rng) / 300.0);
    ds.labels = std::vector<ClassId>(30);
    for (auto& l : *ds.labels) l = static_cast<ClassId>(rng() % 3);
    ds.class_count = 3;
    const auto path = std::filesystem::temp_directory_path() / "hse_roundtrip.csv";
    write_csv(ds, path.string());
    const Dataset back = load_csv(path.string());
    const Dataset again = parse_csv(to_csv(back));
    for (Eigen::Index i = 0; i < 30; ++i)
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK(back.features(i, j) == ds.features(i, j));
            CHECK(again.features(i, j) == ds.features(i, j));
        }
    CHECK(*back.labels == *ds.labels);
    std::filesystem::remove(path);
}

TEST_CASE("validation rejects non-finite features") {
    Dataset ds;
    ds.features.resize(2, 1);
    ds.features << 1.0, std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ds.validate(), ValidationError);
    CHECK_THROWS_AS(parse_csv("x\n1\nnan\n"), Error);
}

TEST_CASE("gaussian blobs") {
    const Dataset ds = make_gaussian_blobs({{5, 7, 3}, 3, 6.0, 2});
    CHECK(ds.size() == 15);
    CHECK(ds.dims() == 3);
    CHECK(ds.class_count == 3);
    CHECK((*ds.labels)[5] == 1);
    const Dataset same = make_gaussian_blobs({{5, 7, 3}, 3, 6.0, 2});
    CHECK(same.features == ds.features);
}
