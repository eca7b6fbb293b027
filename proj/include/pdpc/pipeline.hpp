#pragma once

// End-to-end run: sweeps or synthetic scenario -> PDP -> k-means and sparse
// clustering -> SV fit -> evaluation -> artifact files.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdpc/cluster_fit.hpp"
#include "pdpc/io.hpp"
#include "pdpc/kmeans.hpp"
#include "pdpc/sparse_cluster.hpp"
#include "pdpc/transform.hpp"
#include "pdpc/sv_synth.hpp"

namespace pdpc {

enum class Emit { Pdp, Reconstruction, Phi, Partitions, Fit, Metrics };

std::string to_string(Emit e);
Emit parse_emit(const std::string& name);
std::set<Emit> all_emits();

/// Synthetic input: a conditioned SV draw averaged over an ensemble of sweeps.
struct ScenarioConfig {
    SvParams params = default_scenario_params();
    ScenarioConstraints constraints;
    FrequencyGrid grid;
    std::size_t ensemble = 64;
    bool redraw_fading = true;

    /// On-grid dense rays, cluster arrivals within 60 ns, noise 0.01 (about
    /// 50 dB below the first ray on the default grid).
    static SvParams default_scenario_params();
    void validate() const;
};

struct PdpConfig {
    WindowKind window = WindowKind::Blackman;
    double tail_fraction = 0.2;
    double margin_db = 6.0;
    std::size_t guard_bins = kWrapGuardBins;

    void validate() const;
};

struct RunConfig {
    std::string input = "synthetic";  // sweep file/directory, or "synthetic"
    std::optional<std::filesystem::path> truth;  // truth labels CSV for file input
    ScenarioConfig scenario;
    PdpConfig pdp;
    FeatureConfig kmeans;
    // Use the true cluster count as k when truth onsets are known.
    bool kmeans_k_from_truth = false;
    SparseConfig sparse;
    PeakMode peak_mode = PeakMode::MaxBin;
    std::size_t eval_slack = 2;
    std::filesystem::path output_dir = "pdpclust-out";
    std::set<Emit> emit = all_emits();
    std::uint64_t seed = 1;

    /// Throws InputError on bad values, missing input paths or an empty emit set.
    void validate() const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Fields absent from `j` keep the values already in `cfg`.
void merge_json(RunConfig& cfg, const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical JSON form (output directory and emit set excluded).
std::string config_hash(const RunConfig& cfg);
ArtifactHeader make_header(const RunConfig& cfg);

/// Ingests or synthesizes sweeps, averages their PDP and truncates it above
/// the noise floor. Truth onsets are attached when known.
PowerDelayProfile build_pdp(const RunConfig& cfg, std::vector<std::string>* warnings = nullptr);

struct RunResult {
    PowerDelayProfile pdp;
    KmeansResult kmeans;
    ClusterPartition kmeans_partition;
    ReconstructionResult reconstruction;
    ClusterPartition sparse_partition;
    SvFit fit;
    std::optional<PartitionMetrics> sparse_metrics;
    std::optional<PartitionMetrics> kmeans_metrics;
    std::vector<std::string> warnings;
    std::vector<std::filesystem::path> written;
};

/// Clusters an already built PDP with both methods and fits the SV model.
RunResult analyze_pdp(PowerDelayProfile pdp, const RunConfig& cfg);

/// Full run; artifacts are written only after every stage succeeded.
RunResult run_pipeline(const RunConfig& cfg);

nlohmann::json fit_to_json(const SvFit& fit);
nlohmann::json metrics_to_json(const PartitionMetrics& m);
nlohmann::json diagnostics_to_json(const ReconstructionResult& rec);

/// Renders the requested artifacts as (path, content) pairs.
std::vector<std::pair<std::filesystem::path, std::string>> render_artifacts(const RunResult& result,
                                                                            const RunConfig& cfg);

}  // namespace pdpc
