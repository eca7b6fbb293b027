#pragma once

// File ingestion and artifact emission.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pdpc/sv_synth.hpp"
#include "pdpc/types.hpp"

namespace pdpc {

struct IngestResult {
    std::vector<ChannelTransferFunction> sweeps;
    std::vector<std::string> warnings;
};

/// Reads one sweep file or every sweep file in a directory (sorted by name).
/// Recognized: *.csv with rows `freq_hz,re,im`, and two-port Touchstone
/// *.s2p (forward transmission S21 is taken). A trailing .gz is decompressed
/// transparently. All sweeps must share one uniform grid; a grid other than
/// the 55-65 GHz / 10 MHz default only produces a warning.
IngestResult ingest_sweeps(const std::filesystem::path& path);

ChannelTransferFunction parse_csv_sweep(std::string_view text, const std::string& source);
ChannelTransferFunction parse_touchstone_sweep(std::string_view text, const std::string& source);

/// Warning text when the grid differs from the default measurement grid.
std::optional<std::string> grid_warning(const FrequencyGrid& grid);

/// Whole file as text; gzip input is inflated, plain files pass through.
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Writes several files so that either all of them appear or none do.
void write_files_atomic(const std::vector<std::pair<std::filesystem::path, std::string>>& files);

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

/// Provenance stamped on every artifact.
struct ArtifactHeader {
    std::string tool_version;
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// "# key value" comment lines for CSV artifacts.
std::string header_block(const ArtifactHeader& header);
nlohmann::json header_json(const ArtifactHeader& header);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

std::string format_sweep_csv(const ChannelTransferFunction& ctf, const ArtifactHeader& header);

/// bin,delay_ns,power_db. Noise floor, delay step and ensemble size travel in
/// the header block.
std::string format_pdp_csv(const PowerDelayProfile& pdp, const ArtifactHeader& header);
PowerDelayProfile parse_pdp_csv(std::string_view text, const std::string& source);

/// Same columns as the PDP file, for the reconstruction P̂.
std::string format_phat_csv(std::span<const double> p_hat, double delay_step,
                            const ArtifactHeader& header);

/// bin,value,threshold where bin is the centre bin n+1 of Φ(n); N-2 rows.
std::string format_phi_csv(std::span<const double> phi, double threshold,
                           const ArtifactHeader& header);

/// segment,start_bin,end_bin,label with end_bin exclusive.
std::string format_partition_csv(const ClusterPartition& partition, const ArtifactHeader& header);
ClusterPartition parse_partition_csv(std::string_view text, const std::string& source);

/// bin_index,cluster_id for every bin of an n-bin profile.
std::string format_truth_csv(std::span<const std::size_t> onsets, std::size_t bins,
                             const ArtifactHeader& header);
/// Onsets are the bins where cluster_id changes (plus bin 0).
std::vector<std::size_t> parse_truth_csv(std::string_view text, const std::string& source);

nlohmann::json to_json(const SvParams& params);
SvParams sv_params_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SvRealization& real);
SvRealization realization_from_json(const nlohmann::json& j);

}  // namespace pdpc
