#include "pdpc/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "pdpc/error.hpp"

namespace pdpc {

namespace {

constexpr const char* kStage = "kmeans";

double dist2(const Point2& a, const Point2& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

// Lowest index wins ties.
std::size_t nearest(const Point2& p, const std::vector<Point2>& centroids, double& best) {
    std::size_t idx = 0;
    best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = dist2(p, centroids[c]);
        if (d < best) {
            best = d;
            idx = c;
        }
    }
    return idx;
}

std::vector<Point2> seed_plus_plus(std::span<const Point2> points, std::size_t k,
                                   std::mt19937_64& rng) {
    std::vector<Point2> centroids;
    std::uniform_int_distribution<std::size_t> first(0, points.size() - 1);
    centroids.push_back(points[first(rng)]);
    std::vector<double> d2(points.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centroids.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best;
            nearest(points[i], centroids, best);
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            pick = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = first(rng);  // every point already coincides with a centroid
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

KmeansResult run_lloyd(std::span<const Point2> points, std::vector<Point2> centroids,
                       const FeatureConfig& cfg) {
    const std::size_t k = centroids.size();
    KmeansResult res;
    res.assignment.assign(points.size(), 0);
    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        double wcss = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            double best;
            res.assignment[i] = nearest(points[i], centroids, best);
            wcss += best;
        }
        res.wcss_history.push_back(wcss);
        res.iterations = it + 1;

        std::vector<Point2> sums(k, Point2{0.0, 0.0});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            sums[res.assignment[i]][0] += points[i][0];
            sums[res.assignment[i]][1] += points[i][1];
            ++counts[res.assignment[i]];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its centroid
            const Point2 next{sums[c][0] / static_cast<double>(counts[c]),
                              sums[c][1] / static_cast<double>(counts[c])};
            shift = std::max(shift, std::sqrt(dist2(next, centroids[c])));
            centroids[c] = next;
        }
        if (shift <= cfg.tol) {
            res.converged = true;
            break;
        }
    }
    // Final assignment against the final centroids.
    for (std::size_t i = 0; i < points.size(); ++i) {
        double best;
        res.assignment[i] = nearest(points[i], centroids, best);
    }
    res.centroids = std::move(centroids);
    res.wcss = compute_wcss(points, res.assignment, res.centroids);
    return res;
}

}  // namespace

void FeatureConfig::validate() const {
    if (k < 1) throw InputError(kStage, "k must be >= 1");
    if (restarts < 1) throw InputError(kStage, "restarts must be >= 1");
    if (max_iters < 1) throw InputError(kStage, "max_iters must be >= 1");
    if (!(tol >= 0.0)) throw InputError(kStage, "tol must be >= 0");
    if (!(delay_scale > 0.0) || !(power_scale > 0.0)) {
        throw InputError(kStage, "feature scales must be > 0");
    }
}

double compute_wcss(std::span<const Point2> points, std::span<const std::size_t> assignment,
                    std::span<const Point2> centroids) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) s += dist2(points[i], centroids[assignment[i]]);
    return s;
}

std::vector<Point2> pdp_features(const PowerDelayProfile& pdp, const FeatureConfig& cfg) {
    std::vector<Point2> pts(pdp.size());
    for (std::size_t n = 0; n < pdp.size(); ++n) {
        pts[n] = {static_cast<double>(n), pdp.power_db[n]};
    }
    const std::array<double, 2> scale{cfg.delay_scale, cfg.power_scale};
    for (std::size_t axis = 0; axis < 2; ++axis) {
        double mean = 0.0;
        double spread = 1.0;
        if (cfg.standardize && !pts.empty()) {
            for (const auto& p : pts) mean += p[axis];
            mean /= static_cast<double>(pts.size());
            double var = 0.0;
            for (const auto& p : pts) var += (p[axis] - mean) * (p[axis] - mean);
            var /= static_cast<double>(pts.size());
            if (var > 0.0) spread = std::sqrt(var);
        }
        for (auto& p : pts) p[axis] = scale[axis] * (p[axis] - mean) / spread;
    }
    return pts;
}

KmeansResult lloyd_kmeans(std::span<const Point2> points, const FeatureConfig& cfg,
                          std::uint64_t seed) {
    cfg.validate();
    if (points.empty()) throw InputError(kStage, "empty profile");
    if (cfg.k > points.size()) throw InputError(kStage, "k exceeds the number of samples");

    std::mt19937_64 rng(seed);
    KmeansResult best;
    best.wcss = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        auto res = run_lloyd(points, seed_plus_plus(points, cfg.k, rng), cfg);
        if (res.wcss < best.wcss) best = std::move(res);  // strict: earliest restart wins ties
    }
    return best;
}

KmeansResult cluster_kmeans(const PowerDelayProfile& pdp, const FeatureConfig& cfg,
                            std::uint64_t seed) {
    cfg.validate();
    const auto pts = pdp_features(pdp, cfg);
    return lloyd_kmeans(pts, cfg, seed);
}

ClusterPartition kmeans_to_partition(const KmeansResult& result) {
    ClusterPartition part;
    part.method = PartitionMethod::Kmeans;
    const auto& a = result.assignment;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (i == 0 || a[i] != a[i - 1]) {
            part.onsets.push_back(i);
            part.segments.push_back({i, i + 1, a[i]});
        } else {
            part.segments.back().end = i + 1;
        }
    }
    return part;
}

}  // namespace pdpc
