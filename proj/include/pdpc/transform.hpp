#pragma once

#include <span>
#include <vector>

#include "pdpc/types.hpp"

namespace pdpc {

/// Unnormalized DFT, X(k) = sum_n x(n) exp(sign * j 2 pi k n / N) with
/// sign = +1 when inverse is set, -1 otherwise.
std::vector<cplx> dft(std::span<const cplx> x, bool inverse);

/// Window coefficients for an n-point sweep, scaled so their mean is 1.
/// Blackman is the symmetric three-term form (0.42, 0.5, 0.08).
std::vector<double> make_window(WindowKind kind, std::size_t n);

/// Windowed inverse DFT of the sweep:
///
///     h(n) = sum_k w(k) H(k) exp(+j 2 pi k n / N)
///
/// Positive exponent and no 1/N prefactor. With the mean-normalized window a
/// flat H = 1 maps to h(0) = N regardless of window.
ChannelImpulseResponse ctf_to_cir(const ChannelTransferFunction& ctf,
                                  WindowKind window = WindowKind::Blackman);

/// P(n) = (1/M) sum_m |h_m(n)|^2. Per-bin sums use pairwise summation over
/// ascending ensemble index.
PowerDelayProfile average_pdp(std::span<const ChannelImpulseResponse> cirs);

/// Median of power_db over the trailing tail_fraction of bins; also stored in
/// pdp.noise_floor_db.
double estimate_noise_floor(PowerDelayProfile& pdp, double tail_fraction = 0.2);

/// Trailing bins that carry the circular wrap of the delay-origin main lobe
/// (Blackman main lobe spans +-3 bins).
inline constexpr std::size_t kWrapGuardBins = 3;

/// Prefix of the profile ending at the last bin whose power_db exceeds
/// noise_floor_db + margin_db. The final guard_bins bins are not scanned.
/// Truth onsets past the cut are dropped.
PowerDelayProfile truncate_above_noise(const PowerDelayProfile& pdp, double margin_db = 6.0,
                                       std::size_t guard_bins = 0);

}  // namespace pdpc
