#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "pdpc/error.hpp"
#include "pdpc/sparse_cluster.hpp"

using namespace pdpc;

namespace {

std::vector<double> stencil(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const auto d = oracle::second_difference_matrix(n);
    std::vector<double> out(n - 2, 0.0);
    for (std::size_t i = 0; i + 2 < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i] += d[i * n + j] * x[j];
    }
    return out;
}

double weighted_norm(const std::vector<double>& c, const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += w[i] * std::abs(c[i]);
    return s;
}

double distance(const std::vector<double>& a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Piecewise-linear profile with slope changes `kinks` at bins `at`.
std::vector<double> knees(std::size_t n, const std::vector<std::size_t>& at,
                          const std::vector<double>& kinks, double slope0 = -0.1) {
    std::vector<double> y(n);
    double v = 0.0, s = slope0;
    std::size_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = v;
        if (next < at.size() && at[next] == i) s += kinks[next++];
        v += s;
    }
    return y;
}

}  // namespace

TEST_CASE("inactive constraint returns the input exactly") {
    std::mt19937_64 rng(1);
    const auto p = oracle::piecewise_linear(30, 3, 0.5, rng);
    const std::vector<double> w(28, 1.0);
    const auto sol = solve_weighted_l1(p, w, 1e6, SolverConfig{});
    CHECK(sol.p_hat == p);
    CHECK_FALSE(sol.diagnostics.constraint_active);
}

TEST_CASE("zero budget yields the least-squares line") {
    std::mt19937_64 rng(2);
    for (std::size_t n : {3u, 5u, 40u, 300u}) {
        const auto p = oracle::piecewise_linear(n, 2, 1.0, rng);
        const std::vector<double> w(n - 2, 1.0);
        const auto line = oracle::ols_line_fit(p);
        for (double l_max : {0.0, 1e-12}) {
            const auto sol = solve_weighted_l1(p, w, l_max, SolverConfig{});
            for (std::size_t i = 0; i < n; ++i) CHECK(sol.p_hat[i] == doctest::Approx(line[i]).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("N = 16 noisy piecewise-linear instance matches the dense QP oracle") {
    std::mt19937_64 rng(16);
    const auto p = oracle::piecewise_linear(16, 2, 0.3, rng);
    const std::vector<double> w(14, 1.0);
    const double l_max = 0.4 * weighted_norm(stencil(p), w);
    const auto ref = oracle::weighted_l1_qp(p, w, l_max);
    const auto sol = solve_weighted_l1(p, w, l_max, SolverConfig{});
    CHECK(std::abs(sol.diagnostics.objective / ref.objective - 1.0) < 1e-4);
    CHECK(std::abs(distance(p, sol.p_hat) / ref.objective - 1.0) < 1e-4);
    for (std::size_t i = 0; i < 16; ++i) CHECK(sol.p_hat[i] == doctest::Approx(ref.x[i]).epsilon(1e-3).scale(1.0));
}

TEST_CASE("weighted instances match the dense QP oracle") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> len(3, 20);
    std::uniform_real_distribution<double> wd(0.2, 5.0), frac(0.05, 0.9);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = len(rng);
        const auto p = oracle::piecewise_linear(n, 1 + trial % 3, 0.2, rng);
        std::vector<double> w(n - 2);
        for (auto& x : w) x = wd(rng);
        const double l_max = frac(rng) * weighted_norm(stencil(p), w);
        if (!(l_max > 0.0)) continue;
        const auto ref = oracle::weighted_l1_qp(p, w, l_max);
        const auto sol = solve_weighted_l1(p, w, l_max, SolverConfig{});
        CAPTURE(trial);
        CAPTURE(n);
        CHECK(std::abs(distance(p, sol.p_hat) / ref.objective - 1.0) < 1e-4);
    }
}

TEST_CASE("returned iterate is feasible and diagnostics are consistent") {
    std::mt19937_64 rng(5);
    const auto p = oracle::piecewise_linear(200, 5, 0.5, rng);
    std::vector<double> w(198);
    std::uniform_real_distribution<double> wd(0.5, 2.0);
    for (auto& x : w) x = wd(rng);
    w[10] = 1e9;  // pinned: l_max / w is below the pin ratio
    const double l_max = 10.0;
    const SolverConfig cfg;
    const auto sol = solve_weighted_l1(p, w, l_max, cfg);
    const auto c = stencil(sol.p_hat);
    const double norm = weighted_norm(c, w);
    CHECK(sol.diagnostics.constraint_active);
    CHECK(norm <= l_max * (1.0 + cfg.primal_tol) + sol.diagnostics.rounding_bound);
    CHECK(sol.diagnostics.weighted_norm == doctest::Approx(norm).epsilon(1e-9));
    CHECK(sol.diagnostics.objective == doctest::Approx(distance(p, sol.p_hat)).epsilon(1e-12));
    CHECK(sol.diagnostics.free_coordinates == 197);
    CHECK(std::abs(c[10]) * w[10] <= sol.diagnostics.rounding_bound + 1e-7);
    CHECK(sol.diagnostics.rounding_bound >= 0.0);
    CHECK(sol.diagnostics.rounding_bound <= curvature_rounding_bound(sol.p_hat, w) * 1.000001);
}

TEST_CASE("warm starts reach the same solution") {
    std::mt19937_64 rng(9);
    const auto p = oracle::piecewise_linear(120, 4, 0.3, rng);
    const std::vector<double> w(118, 1.0);
    const double l_max = 0.5 * weighted_norm(stencil(p), w);
    const auto cold = solve_weighted_l1(p, w, l_max, SolverConfig{});
    WarmStart warm{cold.z, cold.u, cold.diagnostics.rho};
    const auto hot = solve_weighted_l1(p, w, l_max, SolverConfig{}, &warm);
    CHECK(hot.diagnostics.iterations <= cold.diagnostics.iterations);
    CHECK(hot.diagnostics.objective == doctest::Approx(cold.diagnostics.objective).epsilon(1e-5));
}

TEST_CASE("solver input validation") {
    const std::vector<double> p{1.0, 2.0, 4.0, 3.0};
    const std::vector<double> w{1.0, 1.0};
    CHECK_THROWS_AS(solve_weighted_l1(std::vector<double>{1.0, 2.0}, std::vector<double>{}, 1.0, {}),
                    InputError);
    CHECK_THROWS_AS(solve_weighted_l1(p, std::vector<double>{1.0}, 1.0, {}), InputError);
    CHECK_THROWS_AS(solve_weighted_l1(p, std::vector<double>{1.0, 0.0}, 1.0, {}), InputError);
    CHECK_THROWS_AS(solve_weighted_l1(p, w, -1.0, {}), InputError);
    SolverConfig bad;
    bad.rho = 0.0;
    CHECK_THROWS_AS(solve_weighted_l1(p, w, 0.5, bad), InputError);
}

TEST_CASE("exhausted iteration budget raises SolverStalled with residuals") {
    std::mt19937_64 rng(3);
    const auto p = oracle::piecewise_linear(100, 4, 1.0, rng);
    const std::vector<double> w(98, 1.0);
    SolverConfig cfg;
    cfg.max_inner_iters = 2;
    try {
        solve_weighted_l1(p, w, 0.1 * weighted_norm(stencil(p), w), cfg);
        FAIL("expected SolverStalled");
    } catch (const SolverStalled& e) {
        CHECK(e.kind() == ErrorKind::Solver);
        CHECK(e.stage() == "sparse-cluster");
        CHECK(e.primal_residual() > 0.0);
        CHECK(std::string(e.what()).find("stalled") != std::string::npos);
    }
}

TEST_CASE("three noise-free knees give exactly three dominant pivots") {
    const std::size_t n = 240;
    const std::vector<std::size_t> at{60, 120, 180};
    for (const auto& kinks : {std::vector<double>{-3.0, 2.5, -4.0}, std::vector<double>{-8.0, 9.0, -6.0}}) {
        const auto p = knees(n, at, kinks);
        SparseConfig cfg;
        cfg.l_max = 30.0;  // above the total kink mass
        const auto res = reconstruct(p, cfg);
        REQUIRE(res.phi.size() == n - 2);
        std::vector<double> mags;
        for (double v : res.phi) mags.push_back(std::abs(v));
        std::vector<std::size_t> order(mags.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return mags[a] > mags[b]; });
        CHECK(mags[order[2]] > 10.0 * mags[order[3]]);
        std::vector<std::size_t> top{order[0] + 1, order[1] + 1, order[2] + 1};
        std::sort(top.begin(), top.end());
        CHECK(top == at);
    }
}

TEST_CASE("affine input converges in one outer iteration with zero pivots") {
    std::vector<double> p(100);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = -0.3 * static_cast<double>(i) - 12.0;
    const auto res = reconstruct(p, SparseConfig{});
    CHECK(res.outer_iterations == 1);
    CHECK(res.weights_converged);
    for (double v : res.phi) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("epsilon keeps zero-curvature weights finite") {
    const std::vector<double> phi{0.0, -0.5, 0.0};
    const auto w = update_weights(std::vector<double>{0, 0, 0, 0, 0}, phi, 1e-9, WeightMode::Curvature);
    CHECK(w[0] == doctest::Approx(1e9));
    CHECK(std::isfinite(w[0]));
    CHECK(w[1] == doctest::Approx(1.0 / (0.5 + 1e-9)));

    const std::vector<double> p_hat{9.0, -2.0, 4.0, 0.0, 1.0};
    const auto lit = update_weights(p_hat, phi, 1e-9, WeightMode::PaperLiteral);
    CHECK(lit[0] == doctest::Approx(0.5));
    CHECK(lit[1] == doctest::Approx(0.25));
    CHECK(lit[2] == doctest::Approx(1e9));

    const auto res = reconstruct(knees(80, {40}, {-2.0}), SparseConfig{});
    for (double v : res.weights_final) {
        CHECK(std::isfinite(v));
        CHECK(v > 0.0);
        CHECK(v <= 1e9 * (1.0 + 1e-12));
    }
}

TEST_CASE("reconstruction invariants on a noisy profile") {
    std::mt19937_64 rng(21);
    auto p = knees(400, {80, 160, 250}, {-1.5, 6.0, -5.0}, -0.2);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& v : p) v += g(rng) - 40.0;
    SparseConfig cfg;
    const auto res = reconstruct(p, cfg);

    CHECK(res.phi.size() == res.p_hat.size() - 2);
    CHECK(res.weight_history.size() == res.outer_iterations);
    CHECK(res.inner_diagnostics.size() == res.outer_iterations);
    // pivot vector is the second difference of P̂
    const auto phi = stencil(res.p_hat);
    for (std::size_t i = 0; i < phi.size(); ++i) CHECK(std::abs(phi[i] - res.phi[i]) <= 1e-12);
    // each outer iterate satisfies its own constraint
    for (std::size_t m = 0; m < res.inner_diagnostics.size(); ++m) {
        const auto& d = res.inner_diagnostics[m];
        CHECK(d.weighted_norm <= d.l_max * (1.0 + cfg.solver.primal_tol) + d.rounding_bound);
    }
    // objective trace: monotone or flagged
    const double first = res.inner_diagnostics.front().objective;
    CHECK((res.objective <= first + 1e-6 || !res.objective_monotone));
    CHECK(res.objective == doctest::Approx(distance(p, res.p_hat)));

    // dB offset covariance
    auto shifted = p;
    for (auto& v : shifted) v += 17.5;
    const auto res2 = reconstruct(shifted, cfg);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(std::abs(res2.p_hat[i] - res.p_hat[i] - 17.5) < 1e-9);
    for (std::size_t i = 0; i < res.phi.size(); ++i) CHECK(std::abs(res2.phi[i] - res.phi[i]) < 1e-9);
}

TEST_CASE("a single weighted solve loses fit monotonically as the budget shrinks") {
    std::mt19937_64 rng(4);
    auto p = knees(300, {50, 110, 170, 230}, {-2.0, 5.0, -4.0, 3.0}, -0.15);
    std::normal_distribution<double> g(0.0, 0.4);
    for (auto& v : p) v += g(rng);
    std::vector<double> w(298);
    std::uniform_real_distribution<double> wd(0.5, 2.0);
    for (auto& x : w) x = wd(rng);
    double prev = 0.0;
    for (double l_max : {60.0, 40.0, 20.0, 10.0, 5.0, 2.0}) {
        const auto sol = solve_weighted_l1(p, w, l_max, SolverConfig{});
        CAPTURE(l_max);
        CHECK(sol.diagnostics.objective >= prev * (1.0 - 1e-6));
        CHECK(sol.diagnostics.weighted_norm <= l_max * (1.0 + 1e-6) + sol.diagnostics.rounding_bound);
        prev = sol.diagnostics.objective;
    }
}

TEST_CASE("rounding bound covers stencil error of a large affine profile") {
    std::vector<double> x(500);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = -60.0 - 0.0371 * static_cast<double>(i);
    const std::vector<double> w(498, 1e9);
    const auto c = stencil(x);
    double actual = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) actual += w[i] * std::abs(c[i]);
    CHECK(actual <= curvature_rounding_bound(x, w));
}

TEST_CASE("config validation") {
    auto bad = [](auto mutate) {
        SparseConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), InputError);
    };
    bad([](SparseConfig& c) { c.epsilon = 0.0; });
    bad([](SparseConfig& c) { c.l_max = 0.0; });
    bad([](SparseConfig& c) { c.max_outer_iters = 0; });
    bad([](SparseConfig& c) { c.weight_tol = -1.0; });
    bad([](SparseConfig& c) { c.solver.primal_tol = -1.0; });
    CHECK_THROWS_AS(reconstruct(std::vector<double>{1.0, 2.0}, SparseConfig{}), InputError);
}

TEST_CASE("extract_clusters examples") {
    const std::size_t n = 200;
    std::vector<double> phi(n - 2, 0.0);
    auto flat = extract_clusters(phi, {});
    CHECK(flat.onsets == std::vector<std::size_t>{0});
    CHECK(is_valid_partition(flat, n));

    phi[50] = -0.5;
    phi[80] = -0.1;
    auto one = extract_clusters(phi, {});
    CHECK(one.onsets == std::vector<std::size_t>{0, 51});
    CHECK(one.method == PartitionMethod::Sparse);
    CHECK(is_valid_partition(one, n));

    phi[51] = -0.6;
    CHECK(extract_clusters(phi, {}).onsets == std::vector<std::size_t>{0, 51});

    ExtractOptions tight;
    tight.min_separation = 1;
    CHECK(extract_clusters(phi, tight).onsets == std::vector<std::size_t>{0, 51, 52});

    // threshold exactly at the level counts as a crossing
    std::vector<double> edge(10, 0.0);
    edge[4] = -0.35;
    CHECK(extract_clusters(edge, {}).onsets == std::vector<std::size_t>{0, 5});

    // absolute mode also sees the upward knees
    std::vector<double> both(20, 0.0);
    both[5] = 0.5;
    both[12] = -0.4;
    ExtractOptions abs_opts;
    abs_opts.mode = ThresholdMode::Absolute;
    CHECK(extract_clusters(both, {}).onsets == std::vector<std::size_t>{0, 13});
    CHECK(extract_clusters(both, abs_opts).onsets == std::vector<std::size_t>{0, 6, 13});
}

TEST_CASE("evaluate_partition examples") {
    const std::vector<std::size_t> truth{0, 40, 90, 150};
    auto m = evaluate_partition(truth, truth, 2);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.mean_offset == 0.0);

    const std::vector<std::size_t> shifted{1, 41, 91, 151};
    m = evaluate_partition(shifted, truth, 2);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.mean_offset == doctest::Approx(1.0));
    CHECK(m.mean_abs_offset == doctest::Approx(1.0));

    const std::vector<std::size_t> extra{0, 40, 70, 90, 150};
    m = evaluate_partition(extra, truth, 2);
    CHECK(m.precision == doctest::Approx(4.0 / 5.0));
    CHECK(m.recall == 1.0);

    const std::vector<std::size_t> far{0, 44, 90};
    m = evaluate_partition(far, truth, 2);
    CHECK(m.matched == 2);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));
    CHECK(m.recall == doctest::Approx(0.5));

    // one-to-one: two found onsets cannot share a truth onset
    const std::vector<std::size_t> crowd{0, 39, 41};
    const std::vector<std::size_t> t2{0, 40};
    m = evaluate_partition(crowd, t2, 2);
    CHECK(m.matched == 2);
    CHECK(m.precision == doctest::Approx(2.0 / 3.0));

    const auto part = ClusterPartition::from_onsets({0, 41}, 100, PartitionMethod::Sparse);
    CHECK(evaluate_partition(part, t2, 2).recall == 1.0);
}
