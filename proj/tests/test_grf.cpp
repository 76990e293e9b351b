#include <doctest.h>

#include <memory>
#include <random>

#include "hse/error.hpp"
#include "hse/grf.hpp"
#include "oracles.hpp"

using namespace hse;

namespace {

std::shared_ptr<const SimilarityGraph> share(const oracle::Dense& w) {
    return std::make_shared<const SimilarityGraph>(oracle::to_graph(w));
}

oracle::Dense path(int n) {
    oracle::Dense w = oracle::Dense::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) w(i, i + 1) = w(i + 1, i) = 1.0;
    return w;
}

// Invariants every posterior must satisfy.
void check_posterior(const oracle::Dense& w, const Posterior& f, const LabelState& labels) {
    const auto comp = oracle::components(w);
    std::vector<char> comp_has_label(f.rows(), 0);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
        if (labels.is_labeled(static_cast<PointId>(i))) comp_has_label[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])] = 1;
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
        CHECK(std::abs(f.row(i).sum() - 1.0) <= 1e-9);
        CHECK(f.row(i).minCoeff() >= 0.0);
        CHECK(f.row(i).maxCoeff() <= 1.0);
        const auto p = static_cast<PointId>(i);
        if (labels.is_labeled(p)) {
            for (Eigen::Index c = 0; c < f.cols(); ++c) CHECK(f(i, c) == (c == labels.at(p) ? 1.0 : 0.0));
        } else if (comp_has_label[static_cast<std::size_t>(comp[static_cast<std::size_t>(i)])]) {
            const double d = w.row(i).sum();
            for (Eigen::Index c = 0; c < f.cols(); ++c) {
                double avg = 0.0;
                for (Eigen::Index j = 0; j < w.cols(); ++j) avg += w(i, j) * f(j, c);
                CHECK(std::abs(f(i, c) - avg / d) <= 1e-8);
            }
        }
    }
}

struct Instance {
    oracle::Dense w;
    std::vector<ClassId> labels;
    int classes;
};

Instance random_instance(std::mt19937_64& rng, int max_n = 50) {
    std::uniform_int_distribution<int> nd(4, max_n), cd(2, 4);
    const int n = nd(rng);
    const int c = cd(rng);
    std::uniform_real_distribution<double> dens(0.05, 0.4);
    Instance in{oracle::random_weights(rng, n, dens(rng)), {}, c};
    std::uniform_int_distribution<int> ld(1, std::max(1, n / 3));
    in.labels = oracle::random_labels(rng, n, c, ld(rng));
    return in;
}

}  // namespace

TEST_CASE("three node path") {
    LabelState s(3, 2);
    s.assign(0, 0);
    s.assign(2, 1);
    const auto m = HarmonicModel::solve(share(path(3)), s);
    CHECK(std::abs(m.posterior()(1, 0) - 0.5) <= 1e-10);
    CHECK(std::abs(m.posterior()(1, 1) - 0.5) <= 1e-10);
}

TEST_CASE("four node path") {
    LabelState s(4, 2);
    s.assign(0, 0);
    s.assign(3, 1);
    const auto m = HarmonicModel::solve(share(path(4)), s);
    const Posterior& f = m.posterior();
    CHECK(std::abs(f(1, 0) - 2.0 / 3.0) <= 1e-10);
    CHECK(std::abs(f(1, 1) - 1.0 / 3.0) <= 1e-10);
    CHECK(std::abs(f(2, 0) - 1.0 / 3.0) <= 1e-10);
    CHECK(std::abs(f(2, 1) - 2.0 / 3.0) <= 1e-10);
}

TEST_CASE("label-free component is uniform") {
    oracle::Dense w = path(3);
    w.conservativeResize(4, 4);
    w.row(3).setZero();
    w.col(3).setZero();
    LabelState s(4, 4);
    s.assign(0, 2);
    const auto m = HarmonicModel::solve(share(w), s);
    for (Eigen::Index c = 0; c < 4; ++c) CHECK(m.posterior()(3, c) == 0.25);
    CHECK(m.g_row(3) < 0);
}

TEST_CASE("zero labels give uniform rows") {
    std::mt19937_64 rng(1);
    const oracle::Dense w = oracle::random_weights(rng, 20, 0.3);
    const auto m = HarmonicModel::solve(share(w), LabelState(20, 3));
    for (Eigen::Index i = 0; i < 20; ++i)
        for (Eigen::Index c = 0; c < 3; ++c) CHECK(m.posterior()(i, c) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("solve matches the direct oracle and keeps the invariants") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const Instance in = random_instance(rng);
        const LabelState s = oracle::to_state(in.labels, in.classes);
        const auto m = HarmonicModel::solve(share(in.w), s);
        CHECK(oracle::max_abs_diff(m.posterior(), oracle::harmonic(in.w, in.labels, in.classes)) <= 1e-8);
        check_posterior(in.w, m.posterior(), s);
    }
}

TEST_CASE("add_label equals retraining") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        Instance in = random_instance(rng);
        auto m = HarmonicModel::solve(share(in.w), oracle::to_state(in.labels, in.classes));
        std::vector<int> order(in.labels.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        int added = 0;
        for (int p : order) {
            if (in.labels[static_cast<std::size_t>(p)] >= 0 || added == 6) continue;
            const ClassId c = static_cast<ClassId>(rng() % static_cast<unsigned>(in.classes));
            m.add_label(p, c);
            in.labels[static_cast<std::size_t>(p)] = c;
            ++added;
            CHECK(oracle::max_abs_diff(m.posterior(), oracle::harmonic(in.w, in.labels, in.classes)) <= 1e-8);
            check_posterior(in.w, m.posterior(), m.labels());
        }
    }
}

TEST_CASE("add_label on a fresh model and down to the last point") {
    std::mt19937_64 rng(8);
    const oracle::Dense w = oracle::random_weights(rng, 15, 0.5);
    auto m = HarmonicModel::solve(share(w), LabelState(15, 3));
    std::vector<ClassId> labels(15, -1);
    for (PointId p = 14; p >= 0; --p) {
        const ClassId c = p % 3;
        m.add_label(p, c);
        labels[static_cast<std::size_t>(p)] = c;
        CHECK(oracle::max_abs_diff(m.posterior(), oracle::harmonic(w, labels, 3)) <= 1e-8);
    }
    CHECK(m.g_inverse().size() == 0);
    for (Eigen::Index i = 0; i < 15; ++i) CHECK(m.posterior().row(i).maxCoeff() == 1.0);
}

TEST_CASE("incremental path up to N = 200") {
    std::mt19937_64 rng(9);
    const oracle::Dense w = oracle::random_weights(rng, 200, 0.04);
    std::vector<ClassId> labels(200, -1);
    auto m = HarmonicModel::solve(share(w), LabelState(200, 4));
    for (int q = 0; q < 40; ++q) {
        PointId p;
        do p = static_cast<PointId>(rng() % 200);
        while (labels[static_cast<std::size_t>(p)] >= 0);
        labels[static_cast<std::size_t>(p)] = static_cast<ClassId>(rng() % 4);
        m.add_label(p, labels[static_cast<std::size_t>(p)]);
        if (q % 10 == 9) CHECK(oracle::max_abs_diff(m.posterior(), oracle::harmonic(w, labels, 4)) <= 1e-8);
    }
}

TEST_CASE("add_label is order insensitive") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const Instance in = random_instance(rng, 30);
        std::vector<PointId> free;
        for (std::size_t i = 0; i < in.labels.size(); ++i)
            if (in.labels[i] < 0) free.push_back(static_cast<PointId>(i));
        if (free.size() < 2) continue;
        const PointId a = free[0], b = free.back();
        auto m1 = HarmonicModel::solve(share(in.w), oracle::to_state(in.labels, in.classes));
        auto m2 = m1;
        m1.add_label(a, 0);
        m1.add_label(b, 1);
        m2.add_label(b, 1);
        m2.add_label(a, 0);
        CHECK(oracle::max_abs_diff(m1.posterior(), m2.posterior()) <= 1e-8);
    }
}

TEST_CASE("relabeling with the predicted one-hot class changes nothing") {
    // Point 2 hangs only off labeled point 0, so its row is exactly one-hot.
    oracle::Dense w = oracle::Dense::Zero(5, 5);
    w(0, 2) = w(2, 0) = 1.0;
    w(0, 1) = w(1, 0) = 1.0;
    w(1, 3) = w(3, 1) = 1.0;
    w(3, 4) = w(4, 3) = 1.0;
    LabelState s(5, 2);
    s.assign(0, 0);
    s.assign(4, 1);
    auto m = HarmonicModel::solve(share(w), s);
    REQUIRE(m.posterior()(2, 0) == doctest::Approx(1.0).epsilon(1e-12));
    const Posterior before = m.posterior();
    CHECK(oracle::max_abs_diff(m.lookahead(2, 0), before) <= 1e-12);
    m.add_label(2, 0);
    CHECK(oracle::max_abs_diff(m.posterior(), before) <= 1e-12);
}

TEST_CASE("lookahead equals retraining for every hypothesis") {
    std::mt19937_64 rng(11);
    int checked = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const Instance in = random_instance(rng, 30);
        const auto m = HarmonicModel::solve(share(in.w), oracle::to_state(in.labels, in.classes));
        const Posterior before = m.posterior();
        const auto version = m.version();
        for (std::size_t q = 0; q < in.labels.size(); ++q) {
            if (in.labels[q] >= 0) continue;
            for (int c = 0; c < in.classes; ++c) {
                auto with = in.labels;
                with[q] = c;
                const Posterior fp = m.lookahead(static_cast<PointId>(q), c);
                CHECK(oracle::max_abs_diff(fp, oracle::harmonic(in.w, with, in.classes)) <= 1e-8);
                LabelState ls = oracle::to_state(with, in.classes);
                check_posterior(in.w, fp, ls);
                ++checked;
            }
        }
        // Lookahead leaves the model untouched.
        CHECK(m.posterior() == before);
        CHECK(m.version() == version);
    }
    CHECK(checked > 100);
}

TEST_CASE("lookahead errors agree with materialised lookaheads") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const Instance in = random_instance(rng, 30);
        const auto m = HarmonicModel::solve(share(in.w), oracle::to_state(in.labels, in.classes));
        for (std::size_t q = 0; q < in.labels.size(); ++q) {
            if (in.labels[q] >= 0) continue;
            const auto errs = m.lookahead_errors(static_cast<PointId>(q));
            for (int c = 0; c < in.classes; ++c)
                CHECK(errs[static_cast<std::size_t>(c)] ==
                      doctest::Approx(oracle::expected_error_sum(m.lookahead(static_cast<PointId>(q), c))).epsilon(1e-9));
        }
    }
}

TEST_CASE("lookahead respects graph automorphisms") {
    // Two mirrored halves: 0-1-2-3 with 0 and 3 labeled with the same class.
    LabelState s(4, 2);
    s.assign(0, 0);
    s.assign(3, 0);
    oracle::Dense w = path(4);
    w(1, 2) = w(2, 1) = 0.5;
    const auto m = HarmonicModel::solve(share(w), s);
    const Posterior a = m.lookahead(1, 1);
    const Posterior b = m.lookahead(2, 1);
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index c = 0; c < 2; ++c) CHECK(a(i, c) == doctest::Approx(b(3 - i, c)).epsilon(1e-12));
}

TEST_CASE("errors") {
    LabelState s(3, 2);
    s.assign(0, 0);
    CHECK_THROWS_AS(s.assign(0, 1), ConflictError);
    CHECK_THROWS_AS(s.assign(1, 2), ValidationError);
    CHECK_THROWS_AS(s.assign(5, 0), ValidationError);
    auto m = HarmonicModel::solve(share(path(3)), s);
    CHECK_THROWS_AS(m.add_label(0, 1), ConflictError);
    CHECK_THROWS_AS(m.lookahead(0, 1), Error);
}

TEST_CASE("predict breaks ties towards the lower class") {
    Posterior f(3, 2);
    f << 0.2, 0.8, 0.5, 0.5, 0.9, 0.1;
    CHECK(predict(f) == std::vector<ClassId>{1, 0, 0});
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u;
    Posterior r(40, 5);
    for (Eigen::Index i = 0; i < 40; ++i)
        for (Eigen::Index c = 0; c < 5; ++c) r(i, c) = std::round(u(rng) * 4.0) / 4.0;
    const auto got = predict(r);
    for (Eigen::Index i = 0; i < 40; ++i) {
        ClassId best = 0;
        for (ClassId c = 0; c < 5; ++c)
            if (r(i, c) > r(i, best)) best = c;
        CHECK(got[static_cast<std::size_t>(i)] == best);
    }
}
