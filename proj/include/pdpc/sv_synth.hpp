#pragma once

// Saleh-Valenzuela channel synthesis with cluster ground truth.

#include <cstdint>
#include <random>
#include <vector>

#include "pdpc/types.hpp"

namespace pdpc {

enum class RayArrivals {
    Poisson,  // exponential inter-arrivals with rate lambda_ray
    Dense,    // one ray every delay_quantum ns
};

/// Ground-truth SV parameters. Times in ns, rates in 1/ns, powers linear.
struct SvParams {
    double gamma_cluster = 20.0;
    double gamma_ray = 5.0;
    double lambda_cluster = 0.05;
    double lambda_ray = 0.5;
    double power_00 = 1.0;
    std::size_t num_clusters_max = 6;
    double horizon = 100.0;
    double noise_power = 0.0;

    RayArrivals ray_arrivals = RayArrivals::Poisson;
    // When > 0, cluster and ray delays are snapped to multiples of this (ns).
    double delay_quantum = 0.0;
    // Latest admissible cluster arrival (ns); 0 means use horizon.
    double cluster_horizon = 0.0;

    /// Throws InputError("sv-synth", ...) on violated invariants.
    void validate() const;

    /// E[|beta|^2] for a ray at excess delay ray_delay in a cluster arriving at cluster_delay.
    double mean_power(double cluster_delay, double ray_delay) const;
};

struct SvTap {
    double delay = 0.0;  // ns, absolute (T_l + tau_kl)
    cplx amplitude;      // beta_kl * exp(j theta_kl)
    std::size_t cluster = 0;
};

struct SvRealization {
    std::vector<SvTap> taps;
    std::vector<double> cluster_onsets;  // T_l, ns
    SvParams params;
};

using Rng = std::mt19937_64;

/// Draws cluster arrivals, ray arrivals and Rayleigh amplitudes. Same
/// (params, seed) always yields an identical realization.
SvRealization generate_realization(const SvParams& params, std::uint64_t seed);

/// Redraws amplitudes and phases about the mean-power law while keeping the
/// arrival structure of `base`.
SvRealization redraw_fading(const SvRealization& base, std::uint64_t seed);

/// Forward model: H(k) = sum_n a_n exp(-j 2 pi f_k tau_n) plus CN(0, noise_power)
/// per frequency point, noise drawn from `noise_seed`.
ChannelTransferFunction realization_to_ctf(const SvRealization& real, const FrequencyGrid& grid,
                                           std::uint64_t noise_seed = 0);

/// Overload validating an explicit (possibly non-uniform) list of frequencies.
ChannelTransferFunction realization_to_ctf(const SvRealization& real,
                                           const std::vector<double>& freqs,
                                           std::uint64_t noise_seed = 0);

struct SyntheticPdpOptions {
    WindowKind window = WindowKind::Blackman;
    // Each ensemble member gets a fresh small-scale fading draw (arrivals fixed).
    // Off by default: the channel is then deterministic and only noise varies.
    bool redraw_fading = false;
};

/// Ensemble members as sweeps: member m uses fading seed derive_seed(seed, 2m)
/// and noise seed derive_seed(seed, 2m + 1). A noise-free channel without
/// fading redraws yields a single sweep.
std::vector<ChannelTransferFunction> synthetic_sweeps(const SvRealization& real,
                                                      const FrequencyGrid& grid,
                                                      std::size_t ensemble, std::uint64_t seed,
                                                      bool redraw_fading);

/// Ensemble-averaged PDP of the realization with truth onsets attached as bins.
PowerDelayProfile synthetic_pdp(const SvRealization& real, const FrequencyGrid& grid,
                                std::size_t ensemble, std::uint64_t seed,
                                const SyntheticPdpOptions& options = {});

/// Cluster onsets of a realization converted to delay-bin indices.
std::vector<std::size_t> onset_bins(const SvRealization& real, double delay_step_seconds);

/// Mean-power jump (dB) at each cluster onset l >= 1: Eq. power of the new
/// cluster's first ray plus all earlier clusters' tails, against the tails alone.
std::vector<double> onset_jumps_db(const SvRealization& real);

/// Admission rules for a benchmark scenario.
struct ScenarioConstraints {
    std::size_t min_clusters = 3;
    std::size_t max_clusters = 6;
    double min_jump_db = 6.0;
    std::size_t max_attempts = 10000;
};

/// Draws realizations from successive sub-seeds of `seed` until one satisfies
/// `constraints`. Throws InputError when max_attempts is exhausted.
SvRealization generate_conditioned(const SvParams& params, const ScenarioConstraints& constraints,
                                   std::uint64_t seed);

/// Derives an independent stream seed from (seed, stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pdpc
