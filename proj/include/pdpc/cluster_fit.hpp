#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdpc/types.hpp"

namespace pdpc {

enum class FitStatus { Ok, Unfittable, NonDecaying };

std::string to_string(FitStatus status);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;  // 1 - SS_res / SS_tot clamped to [0, 1]; 1 when SS_tot == 0
};

/// Ordinary least squares y = intercept + slope * x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct RayDecayFit {
    Segment segment;
    LineFit line;     // power_db vs delay_ns
    double gamma_ns;  // -10 log10(e) / slope, NaN unless status == Ok
    FitStatus status = FitStatus::Ok;
};

std::vector<RayDecayFit> fit_ray_decay(const PowerDelayProfile& pdp,
                                       const ClusterPartition& partition);

/// Segment-length weighted mean of the valid per-cluster gamma estimates.
std::optional<double> pooled_gamma(const std::vector<RayDecayFit>& fits);

// Cluster peak power: the onset bin itself, or the strongest bin of the
// segment. MaxBin is the default because window smearing leaves the detected
// onset anywhere on the rising edge.
enum class PeakMode { FirstBin, MaxBin };

struct ClusterDecayFit {
    double gamma_cluster_ns;  // +inf when peaks do not decay
    double power_00_db;
    double r2;
    bool decaying = true;
    std::vector<double> onset_delays_ns;
    std::vector<double> peak_db;
};

/// OLS of per-cluster peak power (dB) against onset delay (ns).
/// Throws InputError("cluster-fit", "insufficient clusters") below 2 clusters.
ClusterDecayFit fit_cluster_decay(const PowerDelayProfile& pdp, const ClusterPartition& partition,
                                  PeakMode peak = PeakMode::MaxBin);

struct SvFit {
    std::optional<double> gamma_cluster_hat;  // ns
    std::optional<double> gamma_ray_hat;      // pooled, ns
    std::vector<RayDecayFit> rays;
    std::optional<ClusterDecayFit> clusters;
    std::optional<double> power_00_hat_db;
    std::vector<double> onset_delays_ns;
    double residual_db = 0.0;  // pooled RMS of per-segment line residuals
    std::string note;          // why the cluster-level fit is absent, if it is
};

SvFit fit_sv(const PowerDelayProfile& pdp, const ClusterPartition& partition,
             PeakMode peak = PeakMode::MaxBin);

}  // namespace pdpc
