#include "pdpc/sparse_cluster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "pdpc/banded.hpp"
#include "pdpc/difference.hpp"
#include "pdpc/error.hpp"
#include "pdpc/l1_ball.hpp"

namespace pdpc {

namespace {

constexpr const char* kStage = "sparse-cluster";
// Over-relaxation factor for the ADMM split update.
constexpr double kRelax = 1.6;
constexpr std::size_t kRhoUpdatePeriod = 10;
constexpr double kRhoBalance = 10.0;
// Curvature coordinates allowed less than this (dB per bin^2) are pinned to 0.
constexpr double kPinTolerance = 1e-7;

void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(kStage, what);
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double distance2(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Intercept and slope of the least-squares line through (i, y_i).
std::array<double, 2> least_squares_line(std::span<const double> y) {
    const double n = static_cast<double>(y.size());
    const double t_mean = (n - 1.0) / 2.0;
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= n;
    double sty = 0.0;
    double stt = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double dt = static_cast<double>(i) - t_mean;
        sty += dt * (y[i] - y_mean);
        stt += dt * dt;
    }
    const double slope = stt > 0.0 ? sty / stt : 0.0;
    return {y_mean - slope * t_mean, slope};
}

}  // namespace

double curvature_rounding_bound(std::span<const double> x, std::span<const double> weights) {
    constexpr double u = std::numeric_limits<double>::epsilon();
    double bound = 0.0;
    for (std::size_t i = 0; i + 2 < x.size() && i < weights.size(); ++i) {
        bound += weights[i] * 8.0 * u *
                 (std::abs(x[i]) + 2.0 * std::abs(x[i + 1]) + std::abs(x[i + 2]));
    }
    return bound;
}

void SolverConfig::validate() const {
    require(rho > 0.0, "rho must be > 0");
    require(max_inner_iters >= 1, "inner-iters must be >= 1");
    require(primal_tol >= 0.0 && dual_tol >= 0.0, "solver tolerances must be >= 0");
}

void SparseConfig::validate() const {
    require(epsilon > 0.0, "epsilon must be > 0");
    require(l_max > 0.0, "l-max must be > 0");
    require(max_outer_iters >= 1, "outer-iters must be >= 1");
    require(weight_tol >= 0.0, "weight-tol must be >= 0");
    solver.validate();
}

namespace {

// Piecewise-linear parametrization of x with breakpoints at 0, N-1 and the
// centre bin (i + 1) of every free curvature coordinate i. x = B v with hat
// functions B, and the curvature at each interior breakpoint is E v. With
// every coordinate free, B = I and E = Ω2Ω1.
struct KnotModel {
    std::size_t n = 0;
    std::vector<std::size_t> knots;  // breakpoint bins, increasing
    std::vector<std::size_t> free;   // curvature coordinate of interior knot j+1
    // Row equilibration: the split variable is scale[j] * (curvature at knot j+1).
    std::vector<double> scale;

    std::size_t dim() const { return knots.size(); }

    // Jacobi-style equilibration of E against diag(B^T B).
    void equilibrate() {
        std::vector<double> gram_diag(dim(), 0.0);
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const std::size_t a = knots[j];
            const std::size_t b = knots[j + 1];
            const double h = static_cast<double>(b - a);
            gram_diag[j] += 1.0;
            for (std::size_t t = a + 1; t < b; ++t) {
                const double f = static_cast<double>(t - a) / h;
                gram_diag[j] += (1.0 - f) * (1.0 - f);
                gram_diag[j + 1] += f * f;
            }
        }
        gram_diag.back() += 1.0;
        scale.assign(free.size(), 1.0);
        for (std::size_t j = 0; j < free.size(); ++j) {
            const auto r = raw_row(j);
            double acc = 0.0;
            for (std::size_t a = 0; a < 3; ++a) acc += r[a] * r[a] / gram_diag[j + a];
            scale[j] = 1.0 / std::sqrt(acc);
        }
    }

    std::vector<double> expand(std::span<const double> v) const {
        std::vector<double> x(n);
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const std::size_t a = knots[j];
            const std::size_t b = knots[j + 1];
            const double h = static_cast<double>(b - a);
            for (std::size_t t = a; t < b; ++t) {
                const double f = static_cast<double>(t - a) / h;
                x[t] = v[j] * (1.0 - f) + v[j + 1] * f;
            }
        }
        x[n - 1] = v.back();
        return x;
    }

    // B^T y
    std::vector<double> project_back(std::span<const double> y) const {
        std::vector<double> out(dim(), 0.0);
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const std::size_t a = knots[j];
            const std::size_t b = knots[j + 1];
            const double h = static_cast<double>(b - a);
            out[j] += y[a];
            for (std::size_t t = a + 1; t < b; ++t) {
                const double f = static_cast<double>(t - a) / h;
                out[j] += (1.0 - f) * y[t];
                out[j + 1] += f * y[t];
            }
        }
        out.back() += y[n - 1];
        return out;
    }

    // Curvature at interior knot j + 1 as a function of (v_j, v_j+1, v_j+2).
    std::array<double, 3> raw_row(std::size_t j) const {
        const double hl = static_cast<double>(knots[j + 1] - knots[j]);
        const double hr = static_cast<double>(knots[j + 2] - knots[j + 1]);
        return {1.0 / hl, -(1.0 / hl + 1.0 / hr), 1.0 / hr};
    }

    // Row j of the scaled operator E.
    std::array<double, 3> curvature_row(std::size_t j) const {
        auto r = raw_row(j);
        for (double& x : r) x *= scale[j];
        return r;
    }

    std::vector<double> curvature(std::span<const double> v) const {
        std::vector<double> z(free.size());
        for (std::size_t j = 0; j < free.size(); ++j) {
            const auto r = curvature_row(j);
            z[j] = r[0] * v[j] + r[1] * v[j + 1] + r[2] * v[j + 2];
        }
        return z;
    }

    std::vector<double> curvature_adjoint(std::span<const double> z) const {
        std::vector<double> v(dim(), 0.0);
        for (std::size_t j = 0; j < free.size(); ++j) {
            const auto r = curvature_row(j);
            v[j] += r[0] * z[j];
            v[j + 1] += r[1] * z[j];
            v[j + 2] += r[2] * z[j];
        }
        return v;
    }

    // B^T B + rho E^T E, pentadiagonal.
    BandedCholesky factor(double rho) const {
        const std::size_t d = dim();
        std::vector<std::vector<double>> band(3, std::vector<double>(d, 0.0));
        for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
            const std::size_t a = knots[j];
            const std::size_t b = knots[j + 1];
            const double h = static_cast<double>(b - a);
            band[0][j] += 1.0;
            for (std::size_t t = a + 1; t < b; ++t) {
                const double f = static_cast<double>(t - a) / h;
                band[0][j] += (1.0 - f) * (1.0 - f);
                band[0][j + 1] += f * f;
                band[1][j] += f * (1.0 - f);
            }
        }
        band[0][d - 1] += 1.0;
        for (std::size_t j = 0; j < free.size(); ++j) {
            const auto r = curvature_row(j);
            for (std::size_t a = 0; a < 3; ++a) {
                for (std::size_t b = a; b < 3; ++b) band[b - a][j + a] += rho * r[a] * r[b];
            }
        }
        return BandedCholesky(d, std::move(band));
    }
};

}  // namespace

WeightedL1Solution solve_weighted_l1(std::span<const double> p, std::span<const double> weights,
                                     double l_max, const SolverConfig& solver,
                                     const WarmStart* warm) {
    const std::size_t n = p.size();
    require(n >= 3, "profile needs at least 3 bins");
    require(weights.size() == n - 2, "weights must have length N-2");
    require(std::all_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; }),
            "weights must be positive");
    require(l_max >= 0.0, "l_max must be >= 0");
    solver.validate();

    const DifferenceOperators ops(n);
    WeightedL1Solution out;
    auto& diag = out.diagnostics;
    diag.l_max = l_max;

    const auto dp = ops.curvature(p);
    if (weighted_l1_norm(dp, weights) <= l_max) {
        out.p_hat.assign(p.begin(), p.end());
        out.z = dp;
        out.u.assign(n - 2, 0.0);
        diag.weighted_norm = weighted_l1_norm(dp, weights);
        diag.constraint_active = false;
        diag.rho = solver.rho;
        return out;
    }

    // Coordinates whose whole budget l_max / w_i is below the primal tolerance
    // are pinned to zero curvature and drop out of the split.
    KnotModel model;
    model.n = n;
    model.knots.push_back(0);
    for (std::size_t i = 0; i < n - 2; ++i) {
        if (l_max / weights[i] >= kPinTolerance) {
            model.free.push_back(i);
            model.knots.push_back(i + 1);
        }
    }
    model.knots.push_back(n - 1);
    model.equilibrate();
    const std::size_t m = model.free.size();
    // sum w |c| = sum (w / s) |s c|
    std::vector<double> w_free(m);
    for (std::size_t j = 0; j < m; ++j) w_free[j] = weights[model.free[j]] / model.scale[j];

    // Work on the mean-removed profile to keep rounding in the stencil small.
    double offset = 0.0;
    for (double x : p) offset += x;
    offset /= static_cast<double>(n);
    std::vector<double> p_centered(n);
    for (std::size_t i = 0; i < n; ++i) p_centered[i] = p[i] - offset;

    const auto bt_p = model.project_back(p_centered);
    double rho = warm && warm->rho > 0.0 ? warm->rho : solver.rho;
    std::vector<double> z(m);
    std::vector<double> u(m, 0.0);
    if (warm && warm->z.size() == n - 2 && warm->u.size() == n - 2) {
        for (std::size_t j = 0; j < m; ++j) {
            z[j] = warm->z[model.free[j]] * model.scale[j];
            u[j] = warm->u[model.free[j]] * model.scale[j];
        }
    } else {
        for (std::size_t j = 0; j < m; ++j) z[j] = dp[model.free[j]] * model.scale[j];
    }
    z = project_weighted_l1_ball(z, w_free, l_max);

    BandedCholesky system = model.factor(rho);
    const std::size_t d = model.dim();
    std::vector<double> rhs(d);
    std::vector<double> v(d);
    std::vector<double> mix(m);
    std::vector<double> diff(m);
    double r_norm = 0.0;
    double s_norm = 0.0;
    bool converged = m == 0;
    if (m == 0) v = system.solve(bt_p);
    std::size_t it = 0;
    while (!converged && it < solver.max_inner_iters) {
        ++it;
        for (std::size_t j = 0; j < m; ++j) diff[j] = z[j] - u[j];
        const auto back = model.curvature_adjoint(diff);
        for (std::size_t j = 0; j < d; ++j) rhs[j] = bt_p[j] + rho * back[j];
        v = system.solve(rhs);

        const auto ev = model.curvature(v);
        const std::vector<double> z_old = z;
        for (std::size_t j = 0; j < m; ++j) {
            mix[j] = kRelax * ev[j] + (1.0 - kRelax) * z_old[j] + u[j];
        }
        z = project_weighted_l1_ball(mix, w_free, l_max);
        for (std::size_t j = 0; j < m; ++j) {
            u[j] = mix[j] - z[j];
            diff[j] = z[j] - z_old[j];
        }

        r_norm = distance2(ev, z);
        s_norm = rho * norm2(model.curvature_adjoint(diff));
        const double eps_pri = solver.primal_tol * std::max({1.0, norm2(ev), norm2(z)});
        const double eps_dual =
            solver.dual_tol * std::max(1.0, rho * norm2(model.curvature_adjoint(u)));
        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            converged = true;
            break;
        }
        if (it % kRhoUpdatePeriod == 0) {
            const double r_rel = r_norm / std::max(eps_pri, 1e-300);
            const double s_rel = s_norm / std::max(eps_dual, 1e-300);
            double scale = 1.0;
            if (r_rel > kRhoBalance * s_rel) scale = 2.0;
            else if (s_rel > kRhoBalance * r_rel) scale = 0.5;
            if (scale != 1.0) {
                rho *= scale;
                for (double& uj : u) uj /= scale;
                system = model.factor(rho);
            }
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "solver stalled after " << it << " iterations (primal residual " << r_norm
            << ", dual residual " << s_norm << "); raise --inner-iters or loosen tolerances";
        throw SolverStalled(kStage, msg.str(), r_norm, s_norm);
    }

    // Output: the closest profile to p whose curvature equals the split
    // variable exactly (zero on pinned coordinates and off the support). The
    // curvature fixes x up to a line; slopes are integrated from the knots and
    // the line is fitted by least squares.
    std::vector<double> z_full(n - 2, 0.0);
    std::vector<double> u_full(n - 2, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        z_full[model.free[j]] = z[j] / model.scale[j];
        u_full[model.free[j]] = u[j] / model.scale[j];
    }
    std::vector<double> shape(n, 0.0);
    double slope = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        // Curvature coordinate t - 2 is centred on bin t - 1.
        if (t >= 2) slope += z_full[t - 2];
        shape[t] = shape[t - 1] + slope;
    }
    std::vector<double> rest(n);
    for (std::size_t i = 0; i < n; ++i) rest[i] = p_centered[i] - shape[i];
    const auto line = least_squares_line(rest);
    out.p_hat.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.p_hat[i] = shape[i] + line[0] + line[1] * static_cast<double>(i) + offset;
    }

    diag.iterations = it;
    diag.primal_residual = r_norm;
    diag.dual_residual = s_norm;
    diag.rho = rho;
    diag.free_coordinates = m;
    diag.weighted_norm = weighted_l1_norm(ops.curvature(out.p_hat), weights);
    diag.rounding_bound = curvature_rounding_bound(out.p_hat, weights);
    diag.objective = distance2(p, out.p_hat);
    out.z = std::move(z_full);
    out.u = std::move(u_full);
    return out;
}

std::vector<double> update_weights(std::span<const double> p_hat, std::span<const double> phi,
                                   double epsilon, WeightMode mode) {
    std::vector<double> w(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double magnitude =
            mode == WeightMode::Curvature ? std::abs(phi[i]) : std::abs(p_hat[i + 1]);
        w[i] = 1.0 / (magnitude + epsilon);
    }
    return w;
}

ReconstructionResult reconstruct(std::span<const double> power_db, const SparseConfig& cfg) {
    cfg.validate();
    const std::size_t n = power_db.size();
    require(n >= 3, "profile needs at least 3 bins");
    const DifferenceOperators ops(n);

    double scale = 0.0;
    for (double v : power_db) scale = std::max(scale, std::abs(v));
    // Curvature below this is rounding noise of an exactly affine reconstruction.
    const double flat_tol = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + scale);

    ReconstructionResult res;
    std::vector<double> weights(n - 2, 1.0);
    WarmStart warm;
    bool have_warm = false;
    WeightedL1Solution sol;
    for (std::size_t m = 0; m < cfg.max_outer_iters; ++m) {
        sol = solve_weighted_l1(power_db, weights, cfg.l_max, cfg.solver,
                                have_warm ? &warm : nullptr);
        res.inner_diagnostics.push_back(sol.diagnostics);
        res.weight_history.push_back(weights);
        ++res.outer_iterations;

        const auto phi = ops.curvature(sol.p_hat);
        auto next = update_weights(sol.p_hat, phi, cfg.epsilon, cfg.weight_mode);
        double change = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) {
            change = std::max(change, std::abs(next[i] - weights[i]));
        }
        const bool flat = std::all_of(phi.begin(), phi.end(),
                                      [&](double c) { return std::abs(c) <= flat_tol; });
        // A curvature-free iterate is a fixed point: the next weights are all
        // >= the current ones, so the feasible set shrinks but still holds it.
        if (change < cfg.weight_tol || (flat && cfg.weight_mode == WeightMode::Curvature)) {
            res.weights_converged = true;
            break;
        }
        if (m + 1 < cfg.max_outer_iters) {
            weights = std::move(next);
            warm = {sol.z, sol.u, sol.diagnostics.rho};
            have_warm = true;
        }
    }

    res.p_hat = std::move(sol.p_hat);
    res.phi = ops.curvature(res.p_hat);
    res.weights_final = res.weight_history.back();
    res.objective = res.inner_diagnostics.back().objective;
    if (!res.inner_diagnostics.front().constraint_active) {
        res.objective = distance2(power_db, res.p_hat);
    }
    res.objective_monotone = res.objective <= res.inner_diagnostics.front().objective + 1e-6;
    return res;
}

ReconstructionResult reconstruct(const PowerDelayProfile& pdp, const SparseConfig& cfg) {
    auto res = reconstruct(std::span<const double>(pdp.power_db), cfg);
    res.delay_step = pdp.delay_step;
    return res;
}

ClusterPartition extract_clusters(std::span<const double> phi, const ExtractOptions& options) {
    const std::size_t n = phi.size() + 2;
    std::vector<std::size_t> onsets{0};
    bool have_prev = false;
    std::size_t prev = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const bool hit = options.mode == ThresholdMode::Signed
                             ? phi[i] <= options.threshold
                             : std::abs(phi[i]) >= std::abs(options.threshold);
        if (!hit) continue;
        const bool merged = have_prev && i - prev < options.min_separation;
        have_prev = true;
        prev = i;
        if (merged) continue;
        const std::size_t onset = i + 1;
        // A knee right at the start belongs to the first cluster.
        if (onset < options.min_separation) continue;
        onsets.push_back(onset);
    }
    return ClusterPartition::from_onsets(std::move(onsets), n, PartitionMethod::Sparse);
}

ClusterPartition extract_clusters(const ReconstructionResult& result,
                                  const ExtractOptions& options) {
    return extract_clusters(std::span<const double>(result.phi), options);
}

PartitionMetrics evaluate_partition(std::span<const std::size_t> found,
                                    std::span<const std::size_t> truth, std::size_t slack) {
    struct Pair {
        std::size_t dist, t, f;
    };
    std::vector<Pair> pairs;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        for (std::size_t f = 0; f < found.size(); ++f) {
            const std::size_t d = found[f] > truth[t] ? found[f] - truth[t] : truth[t] - found[f];
            if (d <= slack) pairs.push_back({d, t, f});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.dist, a.t, a.f) < std::tie(b.dist, b.t, b.f);
    });
    std::vector<bool> t_used(truth.size(), false);
    std::vector<bool> f_used(found.size(), false);
    PartitionMetrics m;
    m.found = found.size();
    m.truth = truth.size();
    double offset = 0.0;
    double abs_offset = 0.0;
    for (const auto& pr : pairs) {
        if (t_used[pr.t] || f_used[pr.f]) continue;
        t_used[pr.t] = f_used[pr.f] = true;
        ++m.matched;
        offset += static_cast<double>(found[pr.f]) - static_cast<double>(truth[pr.t]);
        abs_offset += static_cast<double>(pr.dist);
    }
    m.precision = m.found ? static_cast<double>(m.matched) / static_cast<double>(m.found) : 1.0;
    m.recall = m.truth ? static_cast<double>(m.matched) / static_cast<double>(m.truth) : 1.0;
    if (m.matched) {
        m.mean_offset = offset / static_cast<double>(m.matched);
        m.mean_abs_offset = abs_offset / static_cast<double>(m.matched);
    }
    return m;
}

PartitionMetrics evaluate_partition(const ClusterPartition& found,
                                    std::span<const std::size_t> truth, std::size_t slack) {
    return evaluate_partition(std::span<const std::size_t>(found.onsets), truth, slack);
}

}  // namespace pdpc
