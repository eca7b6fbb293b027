#include "pdpc/types.hpp"

#include <cmath>
#include <string>

#include "pdpc/error.hpp"

namespace pdpc {

std::string to_string(WindowKind kind) {
    return kind == WindowKind::Blackman ? "blackman" : "rectangular";
}

WindowKind parse_window(const std::string& name) {
    if (name == "blackman") return WindowKind::Blackman;
    if (name == "rectangular") return WindowKind::Rectangular;
    throw InputError("transform", "unknown window '" + name + "' (expected blackman|rectangular)");
}

std::string to_string(PartitionMethod method) {
    return method == PartitionMethod::Kmeans ? "kmeans" : "sparse";
}

FrequencyGrid FrequencyGrid::from_points(const std::vector<double>& freqs, double rel_tol) {
    if (freqs.size() < 2) {
        throw InputError("transform", "frequency grid needs at least 2 points");
    }
    const double step = (freqs.back() - freqs.front()) / static_cast<double>(freqs.size() - 1);
    if (!(step > 0.0)) {
        throw InputError("transform", "frequency grid must be strictly increasing");
    }
    for (std::size_t k = 1; k < freqs.size(); ++k) {
        const double d = freqs[k] - freqs[k - 1];
        if (std::abs(d - step) > rel_tol * step) {
            throw InputError("transform", "non-uniform frequency grid at point " +
                                              std::to_string(k));
        }
    }
    return {freqs.front(), step, freqs.size()};
}

namespace {

double to_db(double p) { return p > 0.0 ? 10.0 * std::log10(p) : kZeroPowerDb; }

}  // namespace

PowerDelayProfile PowerDelayProfile::from_linear(std::vector<double> power, double delay_step,
                                                 std::size_t ensemble_size) {
    PowerDelayProfile pdp;
    pdp.power_db.reserve(power.size());
    for (double p : power) {
        if (!(p >= 0.0)) throw InputError("transform", "negative or NaN power in profile");
        pdp.power_db.push_back(to_db(p));
    }
    pdp.power = std::move(power);
    pdp.delay_step = delay_step;
    pdp.ensemble_size = ensemble_size;
    return pdp;
}

PowerDelayProfile PowerDelayProfile::from_db(std::vector<double> power_db, double delay_step,
                                             std::size_t ensemble_size) {
    PowerDelayProfile pdp;
    pdp.power.reserve(power_db.size());
    for (double db : power_db) {
        if (std::isnan(db)) throw InputError("transform", "NaN power in profile");
        pdp.power.push_back(db <= kZeroPowerDb ? 0.0 : std::pow(10.0, db / 10.0));
    }
    pdp.power_db = std::move(power_db);
    pdp.delay_step = delay_step;
    pdp.ensemble_size = ensemble_size;
    return pdp;
}

ClusterPartition ClusterPartition::from_onsets(std::vector<std::size_t> onsets,
                                               std::size_t length, PartitionMethod method) {
    if (length == 0) throw InputError("sparse-cluster", "cannot partition an empty profile");
    if (onsets.empty() || onsets.front() != 0) {
        throw InputError("sparse-cluster", "first onset must be bin 0");
    }
    ClusterPartition part;
    part.method = method;
    for (std::size_t i = 0; i < onsets.size(); ++i) {
        if (onsets[i] >= length || (i > 0 && onsets[i] <= onsets[i - 1])) {
            throw InputError("sparse-cluster", "onsets must be strictly increasing and < length");
        }
        const std::size_t end = i + 1 < onsets.size() ? onsets[i + 1] : length;
        part.segments.push_back({onsets[i], end, i});
    }
    part.onsets = std::move(onsets);
    return part;
}

bool is_valid_partition(const ClusterPartition& partition, std::size_t length) {
    if (partition.segments.empty() || partition.onsets.size() != partition.segments.size()) {
        return false;
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < partition.segments.size(); ++i) {
        const auto& s = partition.segments[i];
        if (s.start != cursor || s.end <= s.start || partition.onsets[i] != s.start) return false;
        cursor = s.end;
    }
    return cursor == length;
}

}  // namespace pdpc
