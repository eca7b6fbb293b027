#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pdpc {

/// Cholesky factorization of a symmetric positive definite banded matrix,
/// stored by diagonals: band[d][i] = A(i, i + d) for d = 0..bandwidth.
class BandedCholesky {
public:
    BandedCholesky() = default;
    BandedCholesky(std::size_t n, std::vector<std::vector<double>> band);

    std::size_t size() const { return n_; }
    std::vector<double> solve(std::span<const double> rhs) const;

private:
    std::size_t n_ = 0;
    std::size_t bw_ = 0;
    // l_[d][i] = L(i + d, i)
    std::vector<std::vector<double>> l_;
};

/// I + rho * (Ω2Ω1)^T (Ω2Ω1) for signals of length n (pentadiagonal).
BandedCholesky factor_regularized_curvature(std::size_t n, double rho);

/// (Ω2Ω1)(Ω2Ω1)^T, size (n-2) x (n-2) (pentadiagonal 1, -4, 6, -4, 1).
BandedCholesky factor_curvature_gram(std::size_t n);

}  // namespace pdpc
