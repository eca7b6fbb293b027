#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace pdpc {

using cplx = std::complex<double>;

enum class WindowKind { Blackman, Rectangular };

std::string to_string(WindowKind kind);
WindowKind parse_window(const std::string& name);

/// Uniform frequency sweep. Defaults reproduce the 55-65 GHz, 10 MHz step
/// measurement grid (1001 points, both ends inclusive).
struct FrequencyGrid {
    double f_start = 55e9;
    double f_step = 10e6;
    std::size_t count = 1001;

    double frequency(std::size_t k) const { return f_start + f_step * static_cast<double>(k); }
    double delay_step() const { return 1.0 / (static_cast<double>(count) * f_step); }

    /// Builds a grid from explicit sample frequencies; throws on fewer than
    /// two points, non-increasing or non-uniform spacing.
    static FrequencyGrid from_points(const std::vector<double>& freqs, double rel_tol = 1e-6);
};

struct ChannelTransferFunction {
    std::vector<cplx> samples;
    double f_start = 0.0;
    double f_step = 0.0;
    std::string sweep_id;

    FrequencyGrid grid() const { return {f_start, f_step, samples.size()}; }
};

struct ChannelImpulseResponse {
    std::vector<cplx> taps;
    double delay_step = 0.0;  // seconds
    WindowKind window = WindowKind::Blackman;
};

/// Power written to power_db for bins whose linear power is exactly zero.
inline constexpr double kZeroPowerDb = -3000.0;

struct PowerDelayProfile {
    std::vector<double> power;     // linear
    std::vector<double> power_db;  // 10 log10(power)
    double delay_step = 0.0;       // seconds
    std::size_t ensemble_size = 1;
    std::optional<double> noise_floor_db;
    std::optional<std::vector<std::size_t>> truth_onsets;

    std::size_t size() const { return power.size(); }
    double delay_ns(std::size_t bin) const { return static_cast<double>(bin) * delay_step * 1e9; }

    static PowerDelayProfile from_linear(std::vector<double> power, double delay_step,
                                         std::size_t ensemble_size = 1);
    static PowerDelayProfile from_db(std::vector<double> power_db, double delay_step,
                                     std::size_t ensemble_size = 1);
};

enum class PartitionMethod { Kmeans, Sparse };

std::string to_string(PartitionMethod method);

/// Half-open bin range [start, end).
struct Segment {
    std::size_t start = 0;
    std::size_t end = 0;
    std::size_t label = 0;

    std::size_t length() const { return end - start; }
};

/// Contiguous segmentation of the delay axis. segments tile [0, N) and
/// onsets[i] == segments[i].start.
struct ClusterPartition {
    std::vector<std::size_t> onsets;
    std::vector<Segment> segments;
    PartitionMethod method = PartitionMethod::Sparse;
    std::optional<std::vector<std::size_t>> truth_onsets;

    std::size_t size() const { return segments.empty() ? 0 : segments.back().end; }

    /// Builds segments from sorted onsets; first onset must be 0 and all < length.
    static ClusterPartition from_onsets(std::vector<std::size_t> onsets, std::size_t length,
                                        PartitionMethod method);
};

/// True when the segments tile [0, length) with no gaps or overlap and the
/// onsets mirror the segment starts.
bool is_valid_partition(const ClusterPartition& partition, std::size_t length);

}  // namespace pdpc
