#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pdpc {

/// Finite-difference operators on length-n signals.
///
///   omega1: (n-1) x n, rows (+1, -1):  (Ω1 x)_i = x_i - x_{i+1}
///   omega2: (n-2) x (n-1), rows (+1, -1)
///
/// Their product is the second-difference stencil (+1, -2, +1), so entry i
/// of curvature(x) is centred on x_{i+1}.
class DifferenceOperators {
public:
    explicit DifferenceOperators(std::size_t n);

    std::size_t size() const { return n_; }

    std::vector<double> omega1(std::span<const double> x) const;
    std::vector<double> omega2(std::span<const double> y) const;
    /// Ω2 Ω1 x.
    std::vector<double> curvature(std::span<const double> x) const;
    /// (Ω2 Ω1)^T v, length n.
    std::vector<double> curvature_adjoint(std::span<const double> v) const;

    /// Row-major dense materializations.
    std::vector<double> omega1_dense() const;
    std::vector<double> omega2_dense() const;

private:
    std::size_t n_;
};

}  // namespace pdpc
