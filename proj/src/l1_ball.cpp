#include "pdpc/l1_ball.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdpc/error.hpp"

namespace pdpc {

double weighted_l1_norm(std::span<const double> v, std::span<const double> weights) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += weights[i] * std::abs(v[i]);
    return s;
}

std::vector<double> project_weighted_l1_ball(std::span<const double> v,
                                             std::span<const double> weights, double radius) {
    if (v.size() != weights.size()) {
        throw InputError("sparse-cluster", "projection: weight length mismatch");
    }
    if (radius < 0.0) throw InputError("sparse-cluster", "projection: negative radius");

    std::vector<double> z(v.begin(), v.end());
    if (weighted_l1_norm(v, weights) <= radius) return z;
    if (radius == 0.0) {
        std::fill(z.begin(), z.end(), 0.0);
        return z;
    }

    // Sort by |v_i| / w_i descending; the active set is a prefix of this order.
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ra = std::abs(v[a]) / weights[a];
        const double rb = std::abs(v[b]) / weights[b];
        return ra > rb || (ra == rb && a < b);
    });

    double sum_wv = 0.0;
    double sum_ww = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
        const std::size_t i = order[j];
        sum_wv += weights[i] * std::abs(v[i]);
        sum_ww += weights[i] * weights[i];
        const double candidate = (sum_wv - radius) / sum_ww;
        const bool last = j + 1 == order.size();
        const double next_ratio =
            last ? 0.0 : std::abs(v[order[j + 1]]) / weights[order[j + 1]];
        // theta is valid once the next coordinate would be thresholded to zero
        if (last || candidate >= next_ratio) {
            theta = candidate;
            break;
        }
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double mag = std::max(std::abs(v[i]) - theta * weights[i], 0.0);
        z[i] = std::copysign(mag, v[i]);
    }
    return z;
}

}  // namespace pdpc
