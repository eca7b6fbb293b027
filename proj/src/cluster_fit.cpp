#include "pdpc/cluster_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pdpc/error.hpp"

namespace pdpc {

namespace {

constexpr const char* kStage = "cluster-fit";
// 10 log10(e): dB per neper of power.
const double kDbPerNeper = 10.0 / std::numbers::ln10;
// Slopes above this (dB/ns) count as flat.
constexpr double kFlatSlope = -1e-9;

}  // namespace

std::string to_string(FitStatus status) {
    switch (status) {
        case FitStatus::Ok: return "ok";
        case FitStatus::Unfittable: return "unfittable";
        case FitStatus::NonDecaying: return "non-decaying";
    }
    return "unknown";
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r2 = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    return fit;
}

std::vector<RayDecayFit> fit_ray_decay(const PowerDelayProfile& pdp,
                                       const ClusterPartition& partition) {
    std::vector<RayDecayFit> fits;
    for (const auto& seg : partition.segments) {
        RayDecayFit f;
        f.segment = seg;
        f.gamma_ns = std::numeric_limits<double>::quiet_NaN();
        if (seg.length() < 3 || seg.end > pdp.size()) {
            f.status = FitStatus::Unfittable;
            fits.push_back(f);
            continue;
        }
        std::vector<double> x;
        std::vector<double> y;
        for (std::size_t b = seg.start; b < seg.end; ++b) {
            x.push_back(pdp.delay_ns(b));
            y.push_back(pdp.power_db[b]);
        }
        f.line = fit_line(x, y);
        if (f.line.slope >= kFlatSlope) {
            f.status = FitStatus::NonDecaying;
        } else {
            f.gamma_ns = -kDbPerNeper / f.line.slope;
        }
        fits.push_back(f);
    }
    return fits;
}

std::optional<double> pooled_gamma(const std::vector<RayDecayFit>& fits) {
    double num = 0.0;
    double den = 0.0;
    for (const auto& f : fits) {
        if (f.status != FitStatus::Ok) continue;
        num += f.gamma_ns * static_cast<double>(f.segment.length());
        den += static_cast<double>(f.segment.length());
    }
    if (den == 0.0) return std::nullopt;
    return num / den;
}

ClusterDecayFit fit_cluster_decay(const PowerDelayProfile& pdp, const ClusterPartition& partition,
                                  PeakMode peak) {
    if (partition.segments.size() < 2) throw InputError(kStage, "insufficient clusters");
    ClusterDecayFit out;
    for (const auto& seg : partition.segments) {
        if (seg.end > pdp.size() || seg.length() == 0) {
            throw InputError(kStage, "partition does not match profile length");
        }
        double level = pdp.power_db[seg.start];
        if (peak == PeakMode::MaxBin) {
            level = *std::max_element(pdp.power_db.begin() + static_cast<std::ptrdiff_t>(seg.start),
                                      pdp.power_db.begin() + static_cast<std::ptrdiff_t>(seg.end));
        }
        out.onset_delays_ns.push_back(pdp.delay_ns(seg.start));
        out.peak_db.push_back(level);
    }
    const auto line = fit_line(out.onset_delays_ns, out.peak_db);
    out.r2 = line.r2;
    out.power_00_db = line.intercept;
    if (line.slope >= kFlatSlope) {
        out.decaying = false;
        out.gamma_cluster_ns = std::numeric_limits<double>::infinity();
    } else {
        out.gamma_cluster_ns = -kDbPerNeper / line.slope;
    }
    return out;
}

SvFit fit_sv(const PowerDelayProfile& pdp, const ClusterPartition& partition, PeakMode peak) {
    SvFit fit;
    fit.rays = fit_ray_decay(pdp, partition);
    fit.gamma_ray_hat = pooled_gamma(fit.rays);
    for (const auto& seg : partition.segments) fit.onset_delays_ns.push_back(pdp.delay_ns(seg.start));

    double ss = 0.0;
    std::size_t count = 0;
    for (const auto& r : fit.rays) {
        if (r.status == FitStatus::Unfittable) continue;
        for (std::size_t b = r.segment.start; b < r.segment.end; ++b) {
            const double e = pdp.power_db[b] - (r.line.intercept + r.line.slope * pdp.delay_ns(b));
            ss += e * e;
            ++count;
        }
    }
    fit.residual_db = count ? std::sqrt(ss / static_cast<double>(count)) : 0.0;

    if (partition.segments.size() >= 2) {
        fit.clusters = fit_cluster_decay(pdp, partition, peak);
        fit.power_00_hat_db = fit.clusters->power_00_db;
        if (fit.clusters->decaying) {
            fit.gamma_cluster_hat = fit.clusters->gamma_cluster_ns;
        } else {
            fit.note = "no inter-cluster decay";
        }
    } else {
        fit.note = "insufficient clusters";
    }
    return fit;
}

}  // namespace pdpc
