#pragma once

// Sparsity-based PDP clustering: reweighted l1 reconstruction of a
// piecewise-linear dB profile, pivot vector, threshold cut.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "pdpc/types.hpp"

namespace pdpc {

struct SolverConfig {
    double rho = 1.0;
    std::size_t max_inner_iters = 200000;
    double primal_tol = 1e-7;
    double dual_tol = 1e-7;

    void validate() const;
};

enum class WeightMode {
    Curvature,     // w_n = 1 / (|[Ω2Ω1 P̂]_n| + eps)
    PaperLiteral,  // w_n = 1 / (|P̂(n)| + eps), n over interior bins
};

enum class ThresholdMode {
    Signed,    // onset where phi <= threshold
    Absolute,  // onset where |phi| >= |threshold|
};

struct SparseConfig {
    double l_max = 20.0;
    double epsilon = 1e-9;
    std::size_t max_outer_iters = 8;
    double weight_tol = 1e-6;
    double threshold = -0.35;
    ThresholdMode threshold_mode = ThresholdMode::Signed;
    std::size_t min_separation = 2;
    WeightMode weight_mode = WeightMode::Curvature;
    SolverConfig solver;

    void validate() const;
};

/// Residual record of one inner solve.
struct InnerDiagnostics {
    std::size_t iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double rho = 0.0;
    double weighted_norm = 0.0;  // sum w |Ω2Ω1 P̂|
    // Worst-case rounding in weighted_norm: stored P̂ values and the stencil
    // evaluation each carry relative error of a few ulp, amplified by w.
    double rounding_bound = 0.0;
    double l_max = 0.0;
    double objective = 0.0;      // ||P - P̂||_2
    bool constraint_active = true;
    std::size_t free_coordinates = 0;  // curvature coordinates left unpinned
};

struct WeightedL1Solution {
    std::vector<double> p_hat;
    InnerDiagnostics diagnostics;
    // ADMM state for warm starts: split variable and scaled dual.
    std::vector<double> z;
    std::vector<double> u;
};

struct WarmStart {
    std::vector<double> z;
    std::vector<double> u;
    double rho = 0.0;
};

/// min ||p - x||_2  s.t.  ||W Ω2Ω1 x||_1 <= l_max, by ADMM on the split
/// z = Ω2Ω1 x: banded quadratic step, exact weighted l1-ball projection,
/// scaled dual update, residual-balanced rho.
///
/// Coordinates whose entire budget l_max / w_i falls below 1e-7 are pinned to
/// zero curvature; x is then optimized over knot values of a piecewise-linear
/// basis, which keeps the quadratic step banded. The returned x is polished
/// to satisfy Ω2Ω1 x = z exactly (up to rounding), so it is feasible.
/// Throws SolverStalled when max_inner_iters is exhausted.
WeightedL1Solution solve_weighted_l1(std::span<const double> p, std::span<const double> weights,
                                     double l_max, const SolverConfig& solver,
                                     const WarmStart* warm = nullptr);

/// Upper bound on sum w_i |computed curvature_i| for an x whose exact curvature
/// vanishes on every coordinate; used as the floating-point allowance when
/// checking ||W Ω2Ω1 x||_1 <= l_max.
double curvature_rounding_bound(std::span<const double> x, std::span<const double> weights);

struct ReconstructionResult {
    std::vector<double> p_hat;
    std::vector<double> phi;  // Ω2Ω1 p_hat, length N-2
    std::vector<double> weights_final;
    std::size_t outer_iterations = 0;
    bool weights_converged = false;
    std::vector<InnerDiagnostics> inner_diagnostics;
    std::vector<std::vector<double>> weight_history;  // weights used by each outer solve
    double objective = 0.0;
    // False when the data-fit objective of the last outer iterate exceeds the first.
    bool objective_monotone = true;
    double delay_step = 0.0;
};

/// Runs the reweighting loop on pdp.power_db.
ReconstructionResult reconstruct(const PowerDelayProfile& pdp, const SparseConfig& cfg);
ReconstructionResult reconstruct(std::span<const double> power_db, const SparseConfig& cfg);

/// Weight update for the next outer iteration.
std::vector<double> update_weights(std::span<const double> p_hat, std::span<const double> phi,
                                   double epsilon, WeightMode mode);

struct ExtractOptions {
    double threshold = -0.35;
    ThresholdMode mode = ThresholdMode::Signed;
    std::size_t min_separation = 2;
};

/// Onsets at n + 1 for every phi(n) crossing the threshold, with 0 prepended.
/// A crossing within min_separation bins of the previous kept crossing is
/// merged into it.
ClusterPartition extract_clusters(std::span<const double> phi, const ExtractOptions& options);
ClusterPartition extract_clusters(const ReconstructionResult& result,
                                  const ExtractOptions& options);

struct PartitionMetrics {
    double precision = 1.0;
    double recall = 1.0;
    double mean_offset = 0.0;      // mean signed (found - truth) over matches
    double mean_abs_offset = 0.0;
    std::size_t matched = 0;
    std::size_t found = 0;
    std::size_t truth = 0;
};

/// Greedy one-to-one matching (closest pairs first) within +-slack bins.
PartitionMetrics evaluate_partition(std::span<const std::size_t> found,
                                    std::span<const std::size_t> truth, std::size_t slack);
PartitionMetrics evaluate_partition(const ClusterPartition& found,
                                    std::span<const std::size_t> truth, std::size_t slack);

}  // namespace pdpc
