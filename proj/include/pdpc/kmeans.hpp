#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pdpc/types.hpp"

namespace pdpc {

struct FeatureConfig {
    // Multipliers applied after optional standardization.
    double delay_scale = 1.0;
    double power_scale = 1.0;
    // z-score both axes first, so neither bin count nor dB range dominates.
    bool standardize = true;
    std::size_t k = 3;
    std::size_t restarts = 10;
    std::size_t max_iters = 300;
    double tol = 1e-9;

    void validate() const;
};

using Point2 = std::array<double, 2>;

struct KmeansResult {
    std::vector<std::size_t> assignment;
    std::vector<Point2> centroids;
    double wcss = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    // wcss after each assignment step of the winning restart.
    std::vector<double> wcss_history;
};

/// Features (delay_scale * n, power_scale * power_db(n)) for every bin, with
/// each axis reduced to zero mean and unit variance first when standardize is set.
std::vector<Point2> pdp_features(const PowerDelayProfile& pdp, const FeatureConfig& cfg);

/// Lloyd iterations with k-means++ seeding on arbitrary 2-D points; best of
/// cfg.restarts by (wcss, restart index). Scales in cfg are ignored here.
KmeansResult lloyd_kmeans(std::span<const Point2> points, const FeatureConfig& cfg,
                          std::uint64_t seed);

KmeansResult cluster_kmeans(const PowerDelayProfile& pdp, const FeatureConfig& cfg,
                            std::uint64_t seed);

/// Sum of squared distances of each point to its assigned centroid.
double compute_wcss(std::span<const Point2> points, std::span<const std::size_t> assignment,
                    std::span<const Point2> centroids);

/// Run-length segmentation of the assignment along the delay axis; each
/// segment keeps its k-means label.
ClusterPartition kmeans_to_partition(const KmeansResult& result);

}  // namespace pdpc
