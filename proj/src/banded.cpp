#include "pdpc/banded.hpp"

#include <cmath>

#include "pdpc/error.hpp"

namespace pdpc {

BandedCholesky::BandedCholesky(std::size_t n, std::vector<std::vector<double>> band)
    : n_(n), bw_(band.empty() ? 0 : band.size() - 1), l_(band.size(), std::vector<double>(n, 0.0)) {
    // Column-oriented banded Cholesky: A = L L^T.
    for (std::size_t j = 0; j < n_; ++j) {
        double d = band[0][j];
        for (std::size_t k = 1; k <= bw_ && k <= j; ++k) d -= l_[k][j - k] * l_[k][j - k];
        if (!(d > 0.0)) throw InputError("sparse-cluster", "banded matrix is not positive definite");
        const double ljj = std::sqrt(d);
        l_[0][j] = ljj;
        for (std::size_t i = 1; i <= bw_ && j + i < n_; ++i) {
            // L(j+i, j) = (A(j+i, j) - sum_k L(j+i, j-k) L(j, j-k)) / L(j, j)
            double s = band[i][j];
            for (std::size_t k = 1; k + i <= bw_ && k <= j; ++k) {
                s -= l_[i + k][j - k] * l_[k][j - k];
            }
            l_[i][j] = s / ljj;
        }
    }
}

std::vector<double> BandedCholesky::solve(std::span<const double> rhs) const {
    std::vector<double> y(rhs.begin(), rhs.end());
    for (std::size_t i = 0; i < n_; ++i) {
        double s = y[i];
        for (std::size_t k = 1; k <= bw_ && k <= i; ++k) s -= l_[k][i - k] * y[i - k];
        y[i] = s / l_[0][i];
    }
    for (std::size_t i = n_; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = 1; k <= bw_ && i + k < n_; ++k) s -= l_[k][i] * y[i + k];
        y[i] = s / l_[0][i];
    }
    return y;
}

BandedCholesky factor_regularized_curvature(std::size_t n, double rho) {
    // D^T D for the (1, -2, 1) stencil: interior rows (1, -4, 6, -4, 1) with
    // boundary corrections in the first and last two rows.
    std::vector<std::vector<double>> band(3, std::vector<double>(n, 0.0));
    const std::size_t m = n - 2;
    for (std::size_t r = 0; r < m; ++r) {
        const double c[3] = {1.0, -2.0, 1.0};
        for (std::size_t a = 0; a < 3; ++a) {
            for (std::size_t b = a; b < 3; ++b) band[b - a][r + a] += rho * c[a] * c[b];
        }
    }
    for (std::size_t i = 0; i < n; ++i) band[0][i] += 1.0;
    return BandedCholesky(n, std::move(band));
}

BandedCholesky factor_curvature_gram(std::size_t n) {
    const std::size_t m = n - 2;
    std::vector<std::vector<double>> band(3, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        band[0][i] = 6.0;
        if (i + 1 < m) band[1][i] = -4.0;
        if (i + 2 < m) band[2][i] = 1.0;
    }
    return BandedCholesky(m, std::move(band));
}

}  // namespace pdpc
