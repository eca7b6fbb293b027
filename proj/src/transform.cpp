#include "pdpc/transform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>

#include "pdpc/error.hpp"

namespace pdpc {

namespace {

constexpr const char* kStage = "transform";

// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace

std::vector<double> make_window(WindowKind kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (kind == WindowKind::Blackman && n > 1) {
        const double denom = static_cast<double>(n - 1);
        for (std::size_t k = 0; k < n; ++k) {
            const double x = 2.0 * std::numbers::pi * static_cast<double>(k) / denom;
            w[k] = 0.42 - 0.5 * std::cos(x) + 0.08 * std::cos(2.0 * x);
        }
        const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(n);
        for (double& x : w) x /= mean;
    }
    return w;
}

std::vector<cplx> dft(std::span<const cplx> x, bool inverse) {
    const std::size_t n = x.size();
    std::vector<cplx> in(x.begin(), x.end());
    std::vector<cplx> out(n);
    if (n == 0) return out;
    auto* in_ptr = reinterpret_cast<fftw_complex*>(in.data());
    auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(n), in_ptr, out_ptr,
                                inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    return out;
}

ChannelImpulseResponse ctf_to_cir(const ChannelTransferFunction& ctf, WindowKind window) {
    const std::size_t n = ctf.samples.size();
    if (n < 2) throw InputError(kStage, "sweep needs at least 2 points");
    if (!(ctf.f_step > 0.0)) throw InputError(kStage, "frequency step must be > 0");

    const auto w = make_window(window, n);
    std::vector<cplx> in(n);
    for (std::size_t k = 0; k < n; ++k) in[k] = ctf.samples[k] * w[k];

    ChannelImpulseResponse cir;
    cir.taps = dft(in, true);
    cir.delay_step = 1.0 / (static_cast<double>(n) * ctf.f_step);
    cir.window = window;
    return cir;
}

PowerDelayProfile average_pdp(std::span<const ChannelImpulseResponse> cirs) {
    if (cirs.empty()) throw InputError(kStage, "cannot average an empty CIR list");
    const std::size_t n = cirs.front().taps.size();
    const double step = cirs.front().delay_step;
    for (const auto& c : cirs) {
        if (c.taps.size() != n) throw InputError(kStage, "CIR lengths differ");
        if (std::abs(c.delay_step - step) > 1e-12 * step) {
            throw InputError(kStage, "CIR delay steps differ");
        }
    }

    const std::size_t m = cirs.size();
    std::vector<double> power(n);
    std::vector<double> column(m);
    for (std::size_t bin = 0; bin < n; ++bin) {
        for (std::size_t i = 0; i < m; ++i) column[i] = std::norm(cirs[i].taps[bin]);
        power[bin] = pairwise_sum(column) / static_cast<double>(m);
    }
    return PowerDelayProfile::from_linear(std::move(power), step, m);
}

double estimate_noise_floor(PowerDelayProfile& pdp, double tail_fraction) {
    if (!(tail_fraction > 0.0 && tail_fraction <= 0.5)) {
        throw InputError(kStage, "tail_fraction must lie in (0, 0.5]");
    }
    if (pdp.power.empty()) throw InputError(kStage, "empty profile");
    if (std::all_of(pdp.power.begin(), pdp.power.end(), [](double p) { return p == 0.0; })) {
        throw InputError(kStage, "silent profile");
    }
    const std::size_t n = pdp.size();
    const auto tail = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
    std::vector<double> t(pdp.power_db.end() - static_cast<std::ptrdiff_t>(tail),
                          pdp.power_db.end());
    std::sort(t.begin(), t.end());
    const double median =
        t.size() % 2 == 1 ? t[t.size() / 2] : 0.5 * (t[t.size() / 2 - 1] + t[t.size() / 2]);
    pdp.noise_floor_db = median;
    return median;
}

PowerDelayProfile truncate_above_noise(const PowerDelayProfile& pdp, double margin_db,
                                       std::size_t guard_bins) {
    if (!pdp.noise_floor_db) throw InputError(kStage, "noise floor not estimated");
    const double level = *pdp.noise_floor_db + margin_db;
    std::size_t last = pdp.size();
    const std::size_t scan_end = guard_bins < pdp.size() ? pdp.size() - guard_bins : 0;
    for (std::size_t i = scan_end; i-- > 0;) {
        if (pdp.power_db[i] > level) {
            last = i;
            break;
        }
    }
    if (last == pdp.size()) throw InputError(kStage, "profile below noise floor");

    PowerDelayProfile out = pdp;
    out.power.resize(last + 1);
    out.power_db.resize(last + 1);
    if (out.truth_onsets) {
        auto& t = *out.truth_onsets;
        t.erase(std::remove_if(t.begin(), t.end(), [&](std::size_t b) { return b > last; }),
                t.end());
    }
    return out;
}

}  // namespace pdpc
