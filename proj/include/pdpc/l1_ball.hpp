#pragma once

#include <span>
#include <vector>

namespace pdpc {

/// Euclidean projection of v onto { z : sum_i w_i |z_i| <= radius }, w_i > 0.
///
/// Exact: sorts |v_i| / w_i and finds the soft-threshold level theta with
///   z_i = sign(v_i) max(|v_i| - theta w_i, 0).
/// With all w_i == 1 this is the usual l1-ball projection.
std::vector<double> project_weighted_l1_ball(std::span<const double> v,
                                             std::span<const double> weights, double radius);

double weighted_l1_norm(std::span<const double> v, std::span<const double> weights);

}  // namespace pdpc
