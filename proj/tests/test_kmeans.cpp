#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pdpc/error.hpp"
#include "pdpc/kmeans.hpp"

using namespace pdpc;

namespace {

std::vector<Point2> blobs(std::size_t per, const std::vector<Point2>& centres, double spread,
                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, spread);
    std::vector<Point2> pts;
    for (const auto& c : centres) {
        for (std::size_t i = 0; i < per; ++i) pts.push_back({c[0] + g(rng), c[1] + g(rng)});
    }
    return pts;
}

std::vector<oracle::Pt> to_oracle(const std::vector<Point2>& pts) {
    return {pts.begin(), pts.end()};
}

KmeansResult with_assignment(std::vector<std::size_t> a) {
    KmeansResult r;
    r.assignment = std::move(a);
    return r;
}

}  // namespace

TEST_CASE("two separated blobs are split exactly") {
    const auto pts = blobs(5, {{0.0, 0.0}, {20.0, 5.0}}, 0.5, 1);
    FeatureConfig cfg;
    cfg.k = 2;
    const auto res = lloyd_kmeans(pts, cfg, 3);
    for (std::size_t i = 1; i < 5; ++i) CHECK(res.assignment[i] == res.assignment[0]);
    for (std::size_t i = 6; i < 10; ++i) CHECK(res.assignment[i] == res.assignment[5]);
    CHECK(res.assignment[0] != res.assignment[5]);

    // wcss equals the sum of intra-blob squared deviations
    double want = 0.0;
    for (std::size_t b = 0; b < 2; ++b) {
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            mx += pts[b * 5 + i][0] / 5.0;
            my += pts[b * 5 + i][1] / 5.0;
        }
        for (std::size_t i = 0; i < 5; ++i) {
            want += std::pow(pts[b * 5 + i][0] - mx, 2) + std::pow(pts[b * 5 + i][1] - my, 2);
        }
    }
    CHECK(res.wcss == doctest::Approx(want).epsilon(1e-12));
    CHECK(res.wcss == doctest::Approx(oracle::brute_force_kmeans(to_oracle(pts), 2).wcss).epsilon(1e-12));
}

TEST_CASE("best-of-restarts reaches the brute-force optimum on tiny instances") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = 2 + trial % 2;
        const std::size_t n = k == 2 ? 12 : 9;
        std::vector<Point2> centres(k);
        for (auto& c : centres) c = {4.0 * u(rng), 4.0 * u(rng)};
        std::vector<Point2> pts;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& c = centres[i % k];
            pts.push_back({c[0] + u(rng) * 0.3, c[1] + u(rng) * 0.3});
        }
        FeatureConfig cfg;
        cfg.k = k;
        cfg.restarts = 10;
        const auto res = lloyd_kmeans(pts, cfg, static_cast<std::uint64_t>(trial));
        const auto best = oracle::brute_force_kmeans(to_oracle(pts), k);
        CAPTURE(trial);
        CHECK(res.wcss == doctest::Approx(best.wcss).epsilon(1e-9));
    }
}

TEST_CASE("k = 1 places the centroid at the mean") {
    const auto pts = blobs(10, {{1.0, 2.0}, {-3.0, 0.5}}, 1.0, 4);
    FeatureConfig cfg;
    cfg.k = 1;
    const auto res = lloyd_kmeans(pts, cfg, 1);
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p[0] / pts.size();
        my += p[1] / pts.size();
    }
    CHECK(res.centroids[0][0] == doctest::Approx(mx));
    CHECK(res.centroids[0][1] == doctest::Approx(my));
    double var = 0.0;
    for (const auto& p : pts) var += (std::pow(p[0] - mx, 2) + std::pow(p[1] - my, 2)) / pts.size();
    CHECK(res.wcss == doctest::Approx(var * pts.size()));
}

TEST_CASE("k = n gives zero wcss") {
    const auto pts = blobs(4, {{0.0, 0.0}, {3.0, 3.0}}, 1.0, 5);
    FeatureConfig cfg;
    cfg.k = pts.size();
    const auto res = lloyd_kmeans(pts, cfg, 1);
    CHECK(res.wcss == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("Lloyd iterations never increase wcss") {
    const auto pts = blobs(60, {{0.0, 0.0}, {2.0, 1.0}, {4.0, -1.0}, {1.0, 3.0}}, 1.2, 6);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        FeatureConfig cfg;
        cfg.k = 4;
        cfg.restarts = 1;
        const auto res = lloyd_kmeans(pts, cfg, seed);
        for (std::size_t i = 1; i < res.wcss_history.size(); ++i) {
            CHECK(res.wcss_history[i] <= res.wcss_history[i - 1] * (1.0 + 1e-12));
        }
        CHECK(res.wcss <= res.wcss_history.back() * (1.0 + 1e-12));
        CHECK(res.wcss == doctest::Approx(compute_wcss(pts, res.assignment, res.centroids)));
        CHECK(res.assignment.size() == pts.size());
        for (auto a : res.assignment) CHECK(a < 4);
    }
}

TEST_CASE("label permutation leaves wcss unchanged") {
    const auto pts = blobs(20, {{0.0, 0.0}, {5.0, 0.0}, {0.0, 5.0}}, 1.0, 7);
    FeatureConfig cfg;
    cfg.k = 3;
    const auto res = lloyd_kmeans(pts, cfg, 2);
    const std::vector<std::size_t> perm{2, 0, 1};
    std::vector<std::size_t> a(res.assignment.size());
    std::vector<Point2> c(3);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = perm[res.assignment[i]];
    for (std::size_t j = 0; j < 3; ++j) c[perm[j]] = res.centroids[j];
    CHECK(compute_wcss(pts, a, c) == doctest::Approx(res.wcss).epsilon(1e-14));
}

TEST_CASE("same seed, same clustering") {
    const auto pts = blobs(30, {{0.0, 0.0}, {2.0, 2.0}}, 1.5, 8);
    FeatureConfig cfg;
    cfg.k = 2;
    const auto a = lloyd_kmeans(pts, cfg, 11);
    const auto b = lloyd_kmeans(pts, cfg, 11);
    CHECK(a.assignment == b.assignment);
    CHECK(a.wcss == b.wcss);
}

TEST_CASE("run-length partition examples") {
    auto p = kmeans_to_partition(with_assignment({0, 0, 1, 1}));
    CHECK(p.onsets == std::vector<std::size_t>{0, 2});
    CHECK(p.method == PartitionMethod::Kmeans);
    CHECK(is_valid_partition(p, 4));

    p = kmeans_to_partition(with_assignment({0, 1, 0, 1}));
    CHECK(p.segments.size() == 4);
    CHECK(p.segments[2].label == 0);
    CHECK(p.segments[3].label == 1);
    CHECK(is_valid_partition(p, 4));
}

TEST_CASE("features are standardized, then scaled") {
    const auto pdp = PowerDelayProfile::from_db({0.0, -10.0, -20.0, -30.0, -40.0}, 1e-10);
    FeatureConfig cfg;
    const auto z = pdp_features(pdp, cfg);
    double mx = 0.0, vx = 0.0, my = 0.0, vy = 0.0;
    for (const auto& p : z) {
        mx += p[0] / 5;
        my += p[1] / 5;
    }
    for (const auto& p : z) {
        vx += (p[0] - mx) * (p[0] - mx) / 5;
        vy += (p[1] - my) * (p[1] - my) / 5;
    }
    CHECK(mx == doctest::Approx(0.0).scale(1.0));
    CHECK(vx == doctest::Approx(1.0));
    CHECK(vy == doctest::Approx(1.0));

    cfg.standardize = false;
    cfg.delay_scale = 2.0;
    cfg.power_scale = 0.5;
    const auto raw = pdp_features(pdp, cfg);
    CHECK(raw[3][0] == 6.0);
    CHECK(raw[3][1] == -15.0);
}

TEST_CASE("kmeans input validation") {
    const auto pdp = PowerDelayProfile::from_db({0.0, -1.0, -2.0}, 1e-10);
    FeatureConfig cfg;
    cfg.k = 4;
    CHECK_THROWS_WITH(cluster_kmeans(pdp, cfg, 1), doctest::Contains("k exceeds"));
    cfg.k = 0;
    CHECK_THROWS_AS(cluster_kmeans(pdp, cfg, 1), InputError);
    cfg.k = 1;
    cfg.delay_scale = 0.0;
    CHECK_THROWS_AS(cluster_kmeans(pdp, cfg, 1), InputError);
    cfg.delay_scale = 1.0;
    CHECK_THROWS_WITH(cluster_kmeans(PowerDelayProfile{}, cfg, 1), doctest::Contains("empty"));
}
