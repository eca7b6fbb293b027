#include "pdpc/sv_synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pdpc/error.hpp"
#include "pdpc/transform.hpp"

namespace pdpc {

namespace {

constexpr const char* kStage = "sv-synth";

void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(kStage, what);
}

double snap(double t, double quantum) {
    return quantum > 0.0 ? std::round(t / quantum) * quantum : t;
}

void draw_amplitudes(SvRealization& real, Rng& rng) {
    std::exponential_distribution<double> unit_exp(1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (auto& tap : real.taps) {
        const double t_l = real.cluster_onsets[tap.cluster];
        const double mean = real.params.mean_power(t_l, tap.delay - t_l);
        // |beta|^2 ~ Exp(mean) <=> |beta| Rayleigh with E|beta|^2 = mean.
        const double mag = std::sqrt(mean * unit_exp(rng));
        tap.amplitude = std::polar(mag, phase(rng));
    }
}

// Circularly-symmetric complex Gaussian noise of the given variance per point.
void add_noise(ChannelTransferFunction& ctf, double variance, std::uint64_t seed) {
    if (variance <= 0.0) return;
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, std::sqrt(variance / 2.0));
    for (auto& h : ctf.samples) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        h += cplx{re, im};
    }
}

}  // namespace

void SvParams::validate() const {
    require(gamma_cluster > 0.0, "gamma_cluster must be > 0");
    require(gamma_ray > 0.0, "gamma_ray must be > 0");
    require(lambda_cluster > 0.0, "lambda_cluster must be > 0");
    require(lambda_ray > 0.0, "lambda_ray must be > 0");
    require(power_00 > 0.0, "power_00 must be > 0");
    require(horizon > 0.0, "horizon must be > 0");
    require(noise_power >= 0.0, "noise_power must be >= 0");
    require(delay_quantum >= 0.0, "delay_quantum must be >= 0");
    require(cluster_horizon >= 0.0, "cluster_horizon must be >= 0");
    require(ray_arrivals != RayArrivals::Dense || delay_quantum > 0.0,
            "dense ray arrivals need delay_quantum > 0");
}

double SvParams::mean_power(double cluster_delay, double ray_delay) const {
    return power_00 * std::exp(-cluster_delay / gamma_cluster) * std::exp(-ray_delay / gamma_ray);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over a golden-ratio stride
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

SvRealization generate_realization(const SvParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    SvRealization real;
    real.params = params;

    const double q = params.delay_quantum;
    const double cluster_limit =
        params.cluster_horizon > 0.0 ? std::min(params.cluster_horizon, params.horizon)
                                     : params.horizon;
    std::exponential_distribution<double> cluster_gap(params.lambda_cluster);
    double t = 0.0;
    while (real.cluster_onsets.size() < params.num_clusters_max) {
        if (!real.cluster_onsets.empty()) {
            t += cluster_gap(rng);
            double snapped = snap(t, q);
            if (q > 0.0 && snapped <= real.cluster_onsets.back()) {
                snapped = real.cluster_onsets.back() + q;
            }
            if (snapped > cluster_limit) break;
            real.cluster_onsets.push_back(snapped);
        } else {
            real.cluster_onsets.push_back(0.0);
        }
    }

    std::exponential_distribution<double> ray_gap(params.lambda_ray);
    for (std::size_t l = 0; l < real.cluster_onsets.size(); ++l) {
        const double t_l = real.cluster_onsets[l];
        if (params.ray_arrivals == RayArrivals::Dense) {
            for (std::size_t k = 0;; ++k) {
                const double tau = static_cast<double>(k) * q;
                if (t_l + tau > params.horizon + 1e-9 * q) break;
                real.taps.push_back({t_l + tau, {}, l});
            }
        } else {
            double tau = 0.0;
            while (t_l + snap(tau, q) <= params.horizon) {
                real.taps.push_back({t_l + snap(tau, q), {}, l});
                tau += ray_gap(rng);
            }
        }
    }
    if (real.taps.empty()) throw InputError(kStage, "empty realization");

    draw_amplitudes(real, rng);
    return real;
}

SvRealization redraw_fading(const SvRealization& base, std::uint64_t seed) {
    Rng rng(seed);
    SvRealization real = base;
    draw_amplitudes(real, rng);
    return real;
}

ChannelTransferFunction realization_to_ctf(const SvRealization& real, const FrequencyGrid& grid,
                                           std::uint64_t noise_seed) {
    require(grid.count >= 2, "frequency grid needs at least 2 points");
    require(grid.f_step > 0.0, "frequency step must be > 0");

    ChannelTransferFunction ctf;
    ctf.f_start = grid.f_start;
    ctf.f_step = grid.f_step;
    ctf.sweep_id = "synthetic";
    ctf.samples.assign(grid.count, cplx{0.0, 0.0});

    // Taps sitting exactly on the delay grid: H is the forward DFT of the
    // per-bin tap sums, each rotated by the f_start phase.
    const double bin_seconds = grid.delay_step();
    std::vector<cplx> binned(grid.count, cplx{0.0, 0.0});
    bool on_grid = true;
    for (const auto& tap : real.taps) {
        const double pos = tap.delay * 1e-9 / bin_seconds;
        const double bin = std::round(pos);
        if (std::abs(pos - bin) > 1e-9 * std::max(1.0, bin) || bin < 0.0) {
            on_grid = false;
            break;
        }
        const double cycles = grid.f_start * bin * bin_seconds;
        // delays at or past the sweep's unambiguous range alias circularly
        binned[static_cast<std::size_t>(bin) % grid.count] +=
            tap.amplitude * std::polar(1.0, -2.0 * std::numbers::pi * (cycles - std::floor(cycles)));
    }
    if (on_grid) {
        ctf.samples = dft(binned, false);
        add_noise(ctf, real.params.noise_power, noise_seed);
        return ctf;
    }

    constexpr std::size_t kResync = 64;  // recompute the phasor exactly every kResync steps
    const double two_pi = 2.0 * std::numbers::pi;
    for (const auto& tap : real.taps) {
        const double tau = tap.delay * 1e-9;
        const cplx step = std::polar(1.0, -two_pi * grid.f_step * tau);
        cplx phasor;
        for (std::size_t k = 0; k < grid.count; ++k) {
            if (k % kResync == 0) {
                // reduce the phase modulo one cycle before scaling by 2 pi
                const double cycles = grid.frequency(k) * tau;
                phasor = std::polar(1.0, -two_pi * (cycles - std::floor(cycles)));
            } else {
                phasor *= step;
            }
            ctf.samples[k] += tap.amplitude * phasor;
        }
    }

    add_noise(ctf, real.params.noise_power, noise_seed);
    return ctf;
}

ChannelTransferFunction realization_to_ctf(const SvRealization& real,
                                           const std::vector<double>& freqs,
                                           std::uint64_t noise_seed) {
    return realization_to_ctf(real, FrequencyGrid::from_points(freqs), noise_seed);
}

std::vector<std::size_t> onset_bins(const SvRealization& real, double delay_step_seconds) {
    std::vector<std::size_t> bins;
    for (double t : real.cluster_onsets) {
        const auto bin = static_cast<std::size_t>(std::llround(t * 1e-9 / delay_step_seconds));
        if (bins.empty() || bin > bins.back()) bins.push_back(bin);
    }
    return bins;
}

std::vector<ChannelTransferFunction> synthetic_sweeps(const SvRealization& real,
                                                      const FrequencyGrid& grid,
                                                      std::size_t ensemble, std::uint64_t seed,
                                                      bool redraw) {
    require(ensemble >= 1, "ensemble must be >= 1");
    // Without noise or fading redraws every member would be identical.
    const bool deterministic = real.params.noise_power == 0.0 && !redraw;
    const std::size_t members = deterministic ? 1 : ensemble;
    std::vector<ChannelTransferFunction> sweeps;
    sweeps.reserve(members);
    for (std::size_t m = 0; m < members; ++m) {
        const std::uint64_t fading_seed = derive_seed(seed, 2 * m);
        const std::uint64_t noise_seed = derive_seed(seed, 2 * m + 1);
        sweeps.push_back(redraw ? realization_to_ctf(redraw_fading(real, fading_seed), grid, noise_seed)
                                : realization_to_ctf(real, grid, noise_seed));
        sweeps.back().sweep_id = "synthetic-" + std::to_string(m);
    }
    return sweeps;
}

PowerDelayProfile synthetic_pdp(const SvRealization& real, const FrequencyGrid& grid,
                                std::size_t ensemble, std::uint64_t seed,
                                const SyntheticPdpOptions& options) {
    const auto sweeps = synthetic_sweeps(real, grid, ensemble, seed, options.redraw_fading);
    std::vector<ChannelImpulseResponse> cirs;
    cirs.reserve(sweeps.size());
    for (const auto& s : sweeps) cirs.push_back(ctf_to_cir(s, options.window));
    PowerDelayProfile pdp = average_pdp(cirs);
    pdp.ensemble_size = ensemble;
    pdp.truth_onsets = onset_bins(real, grid.delay_step());
    return pdp;
}

std::vector<double> onset_jumps_db(const SvRealization& real) {
    const auto& p = real.params;
    const auto& onsets = real.cluster_onsets;
    std::vector<double> jumps;
    for (std::size_t l = 1; l < onsets.size(); ++l) {
        double tails = 0.0;
        for (std::size_t j = 0; j < l; ++j) tails += p.mean_power(onsets[j], onsets[l] - onsets[j]);
        const double fresh = p.mean_power(onsets[l], 0.0);
        jumps.push_back(10.0 * std::log10((fresh + tails) / tails));
    }
    return jumps;
}

SvRealization generate_conditioned(const SvParams& params, const ScenarioConstraints& constraints,
                                   std::uint64_t seed) {
    for (std::size_t attempt = 0; attempt < constraints.max_attempts; ++attempt) {
        SvRealization real = generate_realization(params, derive_seed(seed, attempt));
        const std::size_t count = real.cluster_onsets.size();
        if (count < constraints.min_clusters || count > constraints.max_clusters) continue;
        bool ok = true;
        for (double j : onset_jumps_db(real)) ok = ok && j >= constraints.min_jump_db;
        if (ok) return real;
    }
    throw InputError(kStage, "no realization satisfied the scenario constraints after " +
                                 std::to_string(constraints.max_attempts) + " attempts");
}

}  // namespace pdpc
