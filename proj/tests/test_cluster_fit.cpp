#include <doctest.h>

#include <cmath>

#include "pdpc/cluster_fit.hpp"
#include "pdpc/error.hpp"

using namespace pdpc;

namespace {

constexpr double kStep = 0.1e-9;  // 0.1 ns bins

// Noise-free SV mean-power profile in dB: clusters at `onsets` (bins).
PowerDelayProfile sv_profile(const std::vector<std::size_t>& onsets, std::size_t n,
                             double gamma_cluster, double gamma_ray, double p00_db = 0.0) {
    std::vector<double> db(n);
    for (std::size_t b = 0; b < n; ++b) {
        std::size_t l = 0;
        while (l + 1 < onsets.size() && onsets[l + 1] <= b) ++l;
        const double t_l = static_cast<double>(onsets[l]) * kStep * 1e9;
        const double tau = static_cast<double>(b - onsets[l]) * kStep * 1e9;
        db[b] = p00_db + 10.0 * std::log10(std::exp(-t_l / gamma_cluster) * std::exp(-tau / gamma_ray));
    }
    return PowerDelayProfile::from_db(db, kStep);
}

}  // namespace

TEST_CASE("line fit is exact on a line and reports r2") {
    const auto f = fit_line({0.0, 1.0, 2.0, 3.0}, {1.0, 3.0, 5.0, 7.0});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
    CHECK(f.r2 == doctest::Approx(1.0));
    const auto flat = fit_line({0.0, 1.0, 2.0}, {4.0, 4.0, 4.0});
    CHECK(flat.slope == 0.0);
    CHECK(flat.r2 == 1.0);
    const auto noisy = fit_line({0.0, 1.0, 2.0, 3.0}, {0.0, 1.0, 0.0, 1.0});
    CHECK(noisy.r2 >= 0.0);
    CHECK(noisy.r2 <= 1.0);
}

TEST_CASE("exact exponential cluster recovers gamma = 5 ns") {
    const auto pdp = sv_profile({0}, 300, 20.0, 5.0);
    const auto part = ClusterPartition::from_onsets({0}, 300, PartitionMethod::Sparse);
    const auto fits = fit_ray_decay(pdp, part);
    REQUIRE(fits.size() == 1);
    CHECK(fits[0].status == FitStatus::Ok);
    CHECK(std::abs(fits[0].gamma_ns / 5.0 - 1.0) < 0.01);
    CHECK(fits[0].line.r2 == doctest::Approx(1.0));
}

TEST_CASE("three clusters with Gamma = 20 ns") {
    const std::vector<std::size_t> onsets{0, 150, 320};
    const auto pdp = sv_profile(onsets, 500, 20.0, 5.0);
    const auto part = ClusterPartition::from_onsets(onsets, 500, PartitionMethod::Sparse);
    for (auto mode : {PeakMode::FirstBin, PeakMode::MaxBin}) {
        const auto c = fit_cluster_decay(pdp, part, mode);
        CHECK(c.decaying);
        CHECK(std::abs(c.gamma_cluster_ns / 20.0 - 1.0) < 0.01);
        CHECK(c.power_00_db == doctest::Approx(0.0).scale(1.0));
        CHECK(c.onset_delays_ns[1] == doctest::Approx(15.0));
    }
    const auto fit = fit_sv(pdp, part);
    REQUIRE(fit.gamma_cluster_hat);
    REQUIRE(fit.gamma_ray_hat);
    CHECK(std::abs(*fit.gamma_cluster_hat / 20.0 - 1.0) < 0.01);
    CHECK(std::abs(*fit.gamma_ray_hat / 5.0 - 1.0) < 0.01);
    CHECK(fit.residual_db < 1e-9);
    CHECK(fit.note.empty());
}

TEST_CASE("flat and short segments are flagged") {
    auto pdp = PowerDelayProfile::from_db(std::vector<double>(20, -40.0), kStep);
    const auto part = ClusterPartition::from_onsets({0, 10, 18}, 20, PartitionMethod::Sparse);
    const auto fits = fit_ray_decay(pdp, part);
    CHECK(fits[0].status == FitStatus::NonDecaying);
    CHECK(fits[1].status == FitStatus::NonDecaying);
    CHECK(fits[2].status == FitStatus::Unfittable);
    CHECK(std::isnan(fits[2].gamma_ns));
    CHECK_FALSE(pooled_gamma(fits).has_value());
    CHECK(to_string(FitStatus::Unfittable) == "unfittable");
    CHECK(to_string(FitStatus::NonDecaying) == "non-decaying");
}

TEST_CASE("pooled gamma weights clusters by length") {
    std::vector<RayDecayFit> fits(3);
    fits[0] = {{0, 10, 0}, {}, 4.0, FitStatus::Ok};
    fits[1] = {{10, 40, 1}, {}, 6.0, FitStatus::Ok};
    fits[2] = {{40, 42, 2}, {}, 100.0, FitStatus::Unfittable};
    CHECK(*pooled_gamma(fits) == doctest::Approx((4.0 * 10 + 6.0 * 30) / 40.0));
}

TEST_CASE("one cluster is not enough for Gamma") {
    const auto pdp = sv_profile({0}, 50, 20.0, 5.0);
    const auto part = ClusterPartition::from_onsets({0}, 50, PartitionMethod::Sparse);
    CHECK_THROWS_WITH(fit_cluster_decay(pdp, part), doctest::Contains("insufficient clusters"));
    const auto fit = fit_sv(pdp, part);
    CHECK_FALSE(fit.gamma_cluster_hat.has_value());
    CHECK(fit.note == "insufficient clusters");
}

TEST_CASE("equal-power clusters give an infinite Gamma") {
    const auto pdp = sv_profile({0, 100, 200}, 300, 1e30, 5.0);
    const auto part = ClusterPartition::from_onsets({0, 100, 200}, 300, PartitionMethod::Sparse);
    const auto c = fit_cluster_decay(pdp, part);
    CHECK_FALSE(c.decaying);
    CHECK(std::isinf(c.gamma_cluster_ns));
    const auto fit = fit_sv(pdp, part);
    CHECK_FALSE(fit.gamma_cluster_hat.has_value());
    CHECK(fit.note == "no inter-cluster decay");
}

TEST_CASE("fits are covariant with a dB offset") {
    const std::vector<std::size_t> onsets{0, 120, 260};
    const auto a = sv_profile(onsets, 400, 25.0, 4.0);
    const auto b = sv_profile(onsets, 400, 25.0, 4.0, -33.0);
    const auto part = ClusterPartition::from_onsets(onsets, 400, PartitionMethod::Sparse);
    const auto fa = fit_sv(a, part);
    const auto fb = fit_sv(b, part);
    CHECK(*fb.power_00_hat_db == doctest::Approx(*fa.power_00_hat_db - 33.0).epsilon(1e-12));
    CHECK(*fb.gamma_cluster_hat == doctest::Approx(*fa.gamma_cluster_hat).epsilon(1e-9));
    CHECK(*fb.gamma_ray_hat == doctest::Approx(*fa.gamma_ray_hat).epsilon(1e-9));
}

TEST_CASE("first-bin and max-bin peaks differ on a rising onset") {
    // cluster 1 rises over two bins before its peak
    std::vector<double> db(60);
    for (std::size_t b = 0; b < 30; ++b) db[b] = -0.5 * b;
    db[30] = -25.0;
    db[31] = -12.0;
    for (std::size_t b = 32; b < 60; ++b) db[b] = -10.0 - 0.5 * (b - 32);
    const auto pdp = PowerDelayProfile::from_db(db, kStep);
    const auto part = ClusterPartition::from_onsets({0, 30}, 60, PartitionMethod::Sparse);
    CHECK(fit_cluster_decay(pdp, part, PeakMode::FirstBin).peak_db[1] == -25.0);
    CHECK(fit_cluster_decay(pdp, part, PeakMode::MaxBin).peak_db[1] == -10.0);
}

TEST_CASE("mismatched partition is rejected") {
    const auto pdp = sv_profile({0}, 10, 20.0, 5.0);
    const auto part = ClusterPartition::from_onsets({0, 5}, 20, PartitionMethod::Sparse);
    CHECK_THROWS_AS(fit_cluster_decay(pdp, part), InputError);
}
