#include "pdpc/difference.hpp"

#include "pdpc/error.hpp"

namespace pdpc {

DifferenceOperators::DifferenceOperators(std::size_t n) : n_(n) {
    if (n < 3) throw InputError("sparse-cluster", "difference operators need n >= 3");
}

std::vector<double> DifferenceOperators::omega1(std::span<const double> x) const {
    std::vector<double> y(n_ - 1);
    for (std::size_t i = 0; i + 1 < n_; ++i) y[i] = x[i] - x[i + 1];
    return y;
}

std::vector<double> DifferenceOperators::omega2(std::span<const double> y) const {
    std::vector<double> z(n_ - 2);
    for (std::size_t i = 0; i + 2 < n_; ++i) z[i] = y[i] - y[i + 1];
    return z;
}

std::vector<double> DifferenceOperators::curvature(std::span<const double> x) const {
    std::vector<double> z(n_ - 2);
    for (std::size_t i = 0; i + 2 < n_; ++i) z[i] = x[i] - 2.0 * x[i + 1] + x[i + 2];
    return z;
}

std::vector<double> DifferenceOperators::curvature_adjoint(std::span<const double> v) const {
    std::vector<double> x(n_, 0.0);
    for (std::size_t i = 0; i + 2 < n_; ++i) {
        x[i] += v[i];
        x[i + 1] -= 2.0 * v[i];
        x[i + 2] += v[i];
    }
    return x;
}

std::vector<double> DifferenceOperators::omega1_dense() const {
    std::vector<double> m((n_ - 1) * n_, 0.0);
    for (std::size_t i = 0; i + 1 < n_; ++i) {
        m[i * n_ + i] = 1.0;
        m[i * n_ + i + 1] = -1.0;
    }
    return m;
}

std::vector<double> DifferenceOperators::omega2_dense() const {
    const std::size_t cols = n_ - 1;
    std::vector<double> m((n_ - 2) * cols, 0.0);
    for (std::size_t i = 0; i + 2 < n_; ++i) {
        m[i * cols + i] = 1.0;
        m[i * cols + i + 1] = -1.0;
    }
    return m;
}

}  // namespace pdpc
