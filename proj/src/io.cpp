#include "pdpc/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <system_error>

#include <zlib.h>

#include "pdpc/error.hpp"

namespace pdpc {

namespace fs = std::filesystem;

namespace {

constexpr const char* kStage = "cli-io";

[[noreturn]] void input_error(const std::string& source, std::size_t line, const std::string& what) {
    std::string msg = source;
    if (line > 0) msg += ":" + std::to_string(line);
    throw InputError(kStage, msg + ": " + what);
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::optional<double> to_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::optional<std::size_t> to_index(std::string_view s) {
    s = trim(s);
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

// Calls fn(line_number, line) for every line.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        fn(line_no, text.substr(start, end - start));
        start = end + 1;
    }
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool has_suffix(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Frequency list to grid, with the error pinned to the first bad line.
FrequencyGrid checked_grid(const std::vector<double>& freqs, const std::vector<std::size_t>& lines,
                           const std::string& source) {
    if (freqs.empty()) input_error(source, 0, "empty file");
    for (std::size_t i = 1; i < freqs.size(); ++i) {
        if (!(freqs[i] > freqs[i - 1])) {
            input_error(source, lines[i], "frequency not increasing (rows out of order)");
        }
    }
    if (freqs.size() == 1) input_error(source, lines[0], "a sweep needs at least 2 points");
    // consecutive spacing against the first one, so the first bad row is reported
    const double first = freqs[1] - freqs[0];
    for (std::size_t i = 2; i < freqs.size(); ++i) {
        if (std::abs((freqs[i] - freqs[i - 1]) - first) > 1e-6 * first) {
            input_error(source, lines[i], "non-uniform frequency grid");
        }
    }
    const double step = (freqs.back() - freqs.front()) / static_cast<double>(freqs.size() - 1);
    return FrequencyGrid{freqs.front(), step, freqs.size()};
}

}  // namespace

ChannelTransferFunction parse_csv_sweep(std::string_view text, const std::string& source) {
    std::vector<double> freqs;
    std::vector<std::size_t> lines;
    std::vector<cplx> samples;
    bool seen_row = false;
    for_each_line(text, [&](std::size_t no, std::string_view raw) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') return;
        const auto fields = split(line, ',');
        if (fields.size() != 3) input_error(source, no, "expected 3 fields freq_hz,re,im");
        const auto f = to_number(fields[0]);
        const auto re = to_number(fields[1]);
        const auto im = to_number(fields[2]);
        if (!f || !re || !im) {
            // A single column-name line is allowed before the data.
            if (!seen_row && !f && !to_number(fields[1]) && !to_number(fields[2])) {
                seen_row = true;
                return;
            }
            input_error(source, no, "malformed number");
        }
        seen_row = true;
        freqs.push_back(*f);
        lines.push_back(no);
        samples.emplace_back(*re, *im);
    });
    const auto grid = checked_grid(freqs, lines, source);
    return ChannelTransferFunction{std::move(samples), grid.f_start, grid.f_step, source};
}

ChannelTransferFunction parse_touchstone_sweep(std::string_view text, const std::string& source) {
    double unit = 1e9;
    std::string format = "ma";
    bool option_seen = false;
    std::vector<double> numbers;
    std::vector<std::size_t> number_lines;
    for_each_line(text, [&](std::size_t no, std::string_view raw) {
        auto line = raw;
        if (const auto bang = line.find('!'); bang != std::string_view::npos) line = line.substr(0, bang);
        line = trim(line);
        if (line.empty()) return;
        if (line.front() == '#') {
            if (option_seen) input_error(source, no, "second option line");
            option_seen = true;
            const auto toks = tokens(line.substr(1));
            for (std::size_t i = 0; i < toks.size(); ++i) {
                const auto t = lower(toks[i]);
                if (t == "hz") unit = 1.0;
                else if (t == "khz") unit = 1e3;
                else if (t == "mhz") unit = 1e6;
                else if (t == "ghz") unit = 1e9;
                else if (t == "ma" || t == "db" || t == "ri") format = t;
                else if (t == "s") continue;
                else if (t == "y" || t == "z" || t == "h" || t == "g") {
                    input_error(source, no, "only S-parameter files are supported");
                } else if (t == "r") {
                    ++i;  // reference impedance value
                } else {
                    input_error(source, no, "unknown option '" + std::string(toks[i]) + "'");
                }
            }
            return;
        }
        if (line.front() == '[') input_error(source, no, "Touchstone 2.0 keywords are not supported");
        for (const auto tok : tokens(line)) {
            const auto v = to_number(tok);
            if (!v) input_error(source, no, "malformed number '" + std::string(tok) + "'");
            numbers.push_back(*v);
            number_lines.push_back(no);
        }
    });
    constexpr std::size_t kRecord = 9;  // freq + 4 complex pairs
    if (numbers.empty()) input_error(source, 0, "empty file");
    if (numbers.size() % kRecord != 0) {
        input_error(source, number_lines.back(), "incomplete two-port record (expected 9 values)");
    }
    std::vector<double> freqs;
    std::vector<std::size_t> lines;
    std::vector<cplx> samples;
    for (std::size_t r = 0; r < numbers.size(); r += kRecord) {
        freqs.push_back(numbers[r] * unit);
        lines.push_back(number_lines[r]);
        // Column order S11 S21 S12 S22.
        const double a = numbers[r + 3];
        const double b = numbers[r + 4];
        if (format == "ri") {
            samples.emplace_back(a, b);
        } else {
            const double mag = format == "db" ? std::pow(10.0, a / 20.0) : a;
            samples.push_back(std::polar(mag, b * std::numbers::pi / 180.0));
        }
    }
    const auto grid = checked_grid(freqs, lines, source);
    return ChannelTransferFunction{std::move(samples), grid.f_start, grid.f_step, source};
}

std::optional<std::string> grid_warning(const FrequencyGrid& grid) {
    const FrequencyGrid def;
    const bool same = grid.count == def.count && std::abs(grid.f_start - def.f_start) <= 1e-6 * def.f_step &&
                      std::abs(grid.f_step - def.f_step) <= 1e-9 * def.f_step;
    if (same) return std::nullopt;
    std::ostringstream msg;
    msg << "grid " << grid.f_start << " Hz + " << grid.count << " x " << grid.f_step
        << " Hz differs from the default 55-65 GHz / 10 MHz / 1001-point grid";
    return msg.str();
}

std::string read_text_file(const fs::path& path) {
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw InputError(kStage, path.string() + ": no such file");
    }
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw IoError(kStage, path.string() + ": cannot open");
    std::string out;
    char buf[1 << 16];
    while (true) {
        const int got = gzread(f, buf, sizeof buf);
        if (got < 0) {
            int errnum = 0;
            const std::string what = gzerror(f, &errnum);
            gzclose(f);
            throw IoError(kStage, path.string() + ": read failed (" + what + ")");
        }
        if (got == 0) break;
        out.append(buf, static_cast<std::size_t>(got));
    }
    gzclose(f);
    return out;
}

IngestResult ingest_sweeps(const fs::path& path) {
    std::error_code ec;
    std::vector<fs::path> files;
    if (fs::is_directory(path, ec)) {
        for (const auto& entry : fs::directory_iterator(path)) {
            if (!entry.is_regular_file()) continue;
            const auto name = lower(entry.path().filename().string());
            if (has_suffix(name, ".csv") || has_suffix(name, ".csv.gz") || has_suffix(name, ".s2p") ||
                has_suffix(name, ".s2p.gz")) {
                files.push_back(entry.path());
            }
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw InputError(kStage, path.string() + ": no sweep files in directory");
    } else if (fs::exists(path, ec)) {
        files.push_back(path);
    } else {
        throw InputError(kStage, path.string() + ": no such file or directory");
    }

    IngestResult out;
    for (const auto& file : files) {
        const auto text = read_text_file(file);
        const auto name = lower(file.filename().string());
        const bool touchstone = has_suffix(name, ".s2p") || has_suffix(name, ".s2p.gz");
        out.sweeps.push_back(touchstone ? parse_touchstone_sweep(text, file.string())
                                        : parse_csv_sweep(text, file.string()));
    }
    const auto& first = out.sweeps.front();
    for (const auto& s : out.sweeps) {
        if (s.samples.size() != first.samples.size() ||
            std::abs(s.f_start - first.f_start) > 1e-6 * first.f_step ||
            std::abs(s.f_step - first.f_step) > 1e-9 * first.f_step) {
            throw InputError(kStage, s.sweep_id + ": grid differs from " + first.sweep_id);
        }
    }
    if (auto w = grid_warning(first.grid())) out.warnings.push_back(*w);
    return out;
}

void write_files_atomic(const std::vector<std::pair<fs::path, std::string>>& files) {
    std::vector<fs::path> temps;
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& t : temps) fs::remove(t, ec);
    };
    for (const auto& [path, content] : files) {
        fs::path tmp = path;
        tmp += ".tmp";
        temps.push_back(tmp);
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (out) out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.close();
        if (!out) {
            cleanup();
            throw IoError(kStage, path.string() + ": cannot write");
        }
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
        std::error_code ec;
        fs::rename(temps[i], files[i].first, ec);
        if (ec) {
            cleanup();
            throw IoError(kStage, files[i].first.string() + ": cannot rename (" + ec.message() + ")");
        }
    }
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    write_files_atomic({{path, std::string(content)}});
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : data) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

std::string header_block(const ArtifactHeader& header) {
    std::string out;
    out += "# tool pdpclust " + header.tool_version + "\n";
    out += "# config_hash " + header.config_hash + "\n";
    out += "# seed " + std::to_string(header.seed) + "\n";
    return out;
}

nlohmann::json header_json(const ArtifactHeader& header) {
    return {{"tool", "pdpclust"},
            {"version", header.tool_version},
            {"config_hash", header.config_hash},
            {"seed", header.seed}};
}

std::string format_double(double value) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string format_sweep_csv(const ChannelTransferFunction& ctf, const ArtifactHeader& header) {
    std::string out = header_block(header);
    out += "freq_hz,re,im\n";
    for (std::size_t k = 0; k < ctf.samples.size(); ++k) {
        out += format_double(ctf.f_start + ctf.f_step * static_cast<double>(k)) + "," +
               format_double(ctf.samples[k].real()) + "," + format_double(ctf.samples[k].imag()) + "\n";
    }
    return out;
}

std::string format_pdp_csv(const PowerDelayProfile& pdp, const ArtifactHeader& header) {
    std::string out = header_block(header);
    out += "# delay_step_s " + format_double(pdp.delay_step) + "\n";
    out += "# ensemble_size " + std::to_string(pdp.ensemble_size) + "\n";
    if (pdp.noise_floor_db) out += "# noise_floor_db " + format_double(*pdp.noise_floor_db) + "\n";
    out += "bin,delay_ns,power_db\n";
    for (std::size_t n = 0; n < pdp.size(); ++n) {
        out += std::to_string(n) + "," + format_double(pdp.delay_ns(n)) + "," +
               format_double(pdp.power_db[n]) + "\n";
    }
    return out;
}

PowerDelayProfile parse_pdp_csv(std::string_view text, const std::string& source) {
    std::optional<double> delay_step;
    std::optional<double> noise_floor;
    std::size_t ensemble = 1;
    std::vector<double> delays_ns;
    std::vector<double> power_db;
    bool header_seen = false;
    for_each_line(text, [&](std::size_t no, std::string_view raw) {
        const auto line = trim(raw);
        if (line.empty()) return;
        if (line.front() == '#') {
            const auto toks = tokens(line.substr(1));
            if (toks.size() != 2) return;
            if (toks[0] == "delay_step_s") delay_step = to_number(toks[1]);
            else if (toks[0] == "noise_floor_db") noise_floor = to_number(toks[1]);
            else if (toks[0] == "ensemble_size") ensemble = to_index(toks[1]).value_or(1);
            return;
        }
        const auto fields = split(line, ',');
        if (fields.size() != 3) input_error(source, no, "expected 3 fields bin,delay_ns,power_db");
        if (!header_seen && !to_index(fields[0])) {
            header_seen = true;
            return;
        }
        header_seen = true;
        const auto bin = to_index(fields[0]);
        const auto d = to_number(fields[1]);
        const auto p = to_number(fields[2]);
        if (!bin || !d || !p) input_error(source, no, "malformed number");
        if (*bin != power_db.size()) input_error(source, no, "bins must run 0, 1, 2, ...");
        delays_ns.push_back(*d);
        power_db.push_back(*p);
    });
    if (power_db.empty()) input_error(source, 0, "empty file");
    if (!delay_step) {
        if (delays_ns.size() < 2) input_error(source, 0, "cannot infer the delay step");
        delay_step = (delays_ns[1] - delays_ns[0]) * 1e-9;
    }
    if (!(*delay_step > 0.0)) input_error(source, 0, "delay step must be > 0");
    auto pdp = PowerDelayProfile::from_db(std::move(power_db), *delay_step, ensemble);
    pdp.noise_floor_db = noise_floor;
    return pdp;
}

std::string format_phat_csv(std::span<const double> p_hat, double delay_step,
                            const ArtifactHeader& header) {
    std::string out = header_block(header);
    out += "bin,delay_ns,power_db\n";
    for (std::size_t n = 0; n < p_hat.size(); ++n) {
        out += std::to_string(n) + "," + format_double(static_cast<double>(n) * delay_step * 1e9) +
               "," + format_double(p_hat[n]) + "\n";
    }
    return out;
}

std::string format_phi_csv(std::span<const double> phi, double threshold,
                           const ArtifactHeader& header) {
    std::string out = header_block(header);
    out += "bin,value,threshold\n";
    const auto thr = format_double(threshold);
    for (std::size_t n = 0; n < phi.size(); ++n) {
        out += std::to_string(n + 1) + "," + format_double(phi[n]) + "," + thr + "\n";
    }
    return out;
}

std::string format_partition_csv(const ClusterPartition& partition, const ArtifactHeader& header) {
    std::string out = header_block(header);
    out += "# method " + to_string(partition.method) + "\n";
    out += "segment,start_bin,end_bin,label\n";
    for (std::size_t i = 0; i < partition.segments.size(); ++i) {
        const auto& s = partition.segments[i];
        out += std::to_string(i) + "," + std::to_string(s.start) + "," + std::to_string(s.end) + "," +
               std::to_string(s.label) + "\n";
    }
    return out;
}

ClusterPartition parse_partition_csv(std::string_view text, const std::string& source) {
    ClusterPartition part;
    bool header_seen = false;
    for_each_line(text, [&](std::size_t no, std::string_view raw) {
        const auto line = trim(raw);
        if (line.empty()) return;
        if (line.front() == '#') {
            const auto toks = tokens(line.substr(1));
            if (toks.size() == 2 && toks[0] == "method") {
                part.method = toks[1] == "kmeans" ? PartitionMethod::Kmeans : PartitionMethod::Sparse;
            }
            return;
        }
        const auto fields = split(line, ',');
        if (fields.size() != 4) input_error(source, no, "expected 4 fields segment,start_bin,end_bin,label");
        if (!header_seen && !to_index(fields[0])) {
            header_seen = true;
            return;
        }
        header_seen = true;
        const auto start = to_index(fields[1]);
        const auto end = to_index(fields[2]);
        const auto label = to_index(fields[3]);
        if (!start || !end || !label) input_error(source, no, "malformed number");
        const std::size_t expected = part.segments.empty() ? 0 : part.segments.back().end;
        if (*start != expected || *end <= *start) {
            input_error(source, no, "segments must tile the profile without gaps or overlap");
        }
        part.segments.push_back({*start, *end, *label});
        part.onsets.push_back(*start);
    });
    if (part.segments.empty()) input_error(source, 0, "empty file");
    return part;
}

std::string format_truth_csv(std::span<const std::size_t> onsets, std::size_t bins,
                             const ArtifactHeader& header) {
    std::string out = header_block(header);
    out += "bin_index,cluster_id\n";
    std::size_t cluster = 0;
    for (std::size_t n = 0; n < bins; ++n) {
        while (cluster + 1 < onsets.size() && onsets[cluster + 1] <= n) ++cluster;
        out += std::to_string(n) + "," + std::to_string(cluster) + "\n";
    }
    return out;
}

std::vector<std::size_t> parse_truth_csv(std::string_view text, const std::string& source) {
    std::vector<std::size_t> onsets;
    std::optional<std::size_t> prev_bin;
    std::optional<std::size_t> prev_id;
    bool header_seen = false;
    for_each_line(text, [&](std::size_t no, std::string_view raw) {
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#') return;
        const auto fields = split(line, ',');
        if (fields.size() != 2) input_error(source, no, "expected 2 fields bin_index,cluster_id");
        if (!header_seen && !to_index(fields[0])) {
            header_seen = true;
            return;
        }
        header_seen = true;
        const auto bin = to_index(fields[0]);
        const auto id = to_index(fields[1]);
        if (!bin || !id) input_error(source, no, "malformed number");
        if (prev_bin && *bin != *prev_bin + 1) input_error(source, no, "bins must be consecutive");
        if (!prev_bin && *bin != 0) input_error(source, no, "first bin must be 0");
        if (!prev_id || *id != *prev_id) onsets.push_back(*bin);
        prev_bin = bin;
        prev_id = id;
    });
    if (onsets.empty()) input_error(source, 0, "empty file");
    return onsets;
}

nlohmann::json to_json(const SvParams& p) {
    return {{"gamma_cluster_ns", p.gamma_cluster},
            {"gamma_ray_ns", p.gamma_ray},
            {"lambda_cluster_per_ns", p.lambda_cluster},
            {"lambda_ray_per_ns", p.lambda_ray},
            {"power_00", p.power_00},
            {"num_clusters_max", p.num_clusters_max},
            {"horizon_ns", p.horizon},
            {"noise_power", p.noise_power},
            {"ray_arrivals", p.ray_arrivals == RayArrivals::Dense ? "dense" : "poisson"},
            {"delay_quantum_ns", p.delay_quantum},
            {"cluster_horizon_ns", p.cluster_horizon}};
}

SvParams sv_params_from_json(const nlohmann::json& j) {
    SvParams p;
    try {
        p.gamma_cluster = j.value("gamma_cluster_ns", p.gamma_cluster);
        p.gamma_ray = j.value("gamma_ray_ns", p.gamma_ray);
        p.lambda_cluster = j.value("lambda_cluster_per_ns", p.lambda_cluster);
        p.lambda_ray = j.value("lambda_ray_per_ns", p.lambda_ray);
        p.power_00 = j.value("power_00", p.power_00);
        p.num_clusters_max = j.value("num_clusters_max", p.num_clusters_max);
        p.horizon = j.value("horizon_ns", p.horizon);
        p.noise_power = j.value("noise_power", p.noise_power);
        const auto arrivals = j.value("ray_arrivals", std::string("poisson"));
        if (arrivals == "dense") p.ray_arrivals = RayArrivals::Dense;
        else if (arrivals == "poisson") p.ray_arrivals = RayArrivals::Poisson;
        else throw InputError(kStage, "ray_arrivals must be 'dense' or 'poisson'");
        p.delay_quantum = j.value("delay_quantum_ns", p.delay_quantum);
        p.cluster_horizon = j.value("cluster_horizon_ns", p.cluster_horizon);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(kStage, std::string("scenario parameters: ") + e.what());
    }
    p.validate();
    return p;
}

nlohmann::json to_json(const SvRealization& real) {
    nlohmann::json taps = nlohmann::json::array();
    for (const auto& t : real.taps) {
        taps.push_back({{"delay_ns", t.delay},
                        {"re", t.amplitude.real()},
                        {"im", t.amplitude.imag()},
                        {"cluster", t.cluster}});
    }
    return {{"params", to_json(real.params)}, {"cluster_onsets_ns", real.cluster_onsets}, {"taps", taps}};
}

SvRealization realization_from_json(const nlohmann::json& j) {
    SvRealization real;
    try {
        real.params = sv_params_from_json(j.at("params"));
        real.cluster_onsets = j.at("cluster_onsets_ns").get<std::vector<double>>();
        for (const auto& t : j.at("taps")) {
            real.taps.push_back({t.at("delay_ns").get<double>(),
                                 cplx(t.at("re").get<double>(), t.at("im").get<double>()),
                                 t.at("cluster").get<std::size_t>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(kStage, std::string("scenario file: ") + e.what());
    }
    if (real.taps.empty()) throw InputError(kStage, "scenario file has no taps");
    return real;
}

}  // namespace pdpc
