// pdpclust: power-delay-profile cluster analysis from the command line.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdpc/error.hpp"
#include "pdpc/io.hpp"
#include "pdpc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace pdpc;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Input: return kExitInput;
        case ErrorKind::Solver: return kExitSolver;
        case ErrorKind::Io: return kExitIo;
    }
    return kExitInput;
}

// --config is applied before the other flags so explicit flags override it.
std::optional<std::string> find_config_arg(int argc, char** argv) {
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
        if (a.rfind("--config=", 0) == 0) return a.substr(9);
    }
    return std::nullopt;
}

struct Cli {
    RunConfig cfg;
    bool quiet = false;
    std::string config_path;

    // String-typed options converted after parsing.
    std::string window;
    std::string rays;
    std::string k;
    std::string threshold_mode;
    std::string weight_mode;
    std::string peak_mode;
    std::vector<std::string> emit;
    std::string input;
    std::string truth;
    bool fixed_fading = false;
    bool no_standardize = false;

    // fit / eval inputs
    std::string pdp_file;
    std::string partition_file;

};

void add_scenario_options(CLI::App* app, Cli& c) {
    auto& sc = c.cfg.scenario;
    auto& p = sc.params;
    app->add_option("--ensemble", sc.ensemble, "Sweeps averaged into the PDP")->capture_default_str();
    app->add_flag("--fixed-fading", c.fixed_fading,
                  "Keep one fading draw for every ensemble member (only noise varies)");
    app->add_option("--gamma-cluster", p.gamma_cluster, "Cluster power decay constant Gamma (ns)")
        ->capture_default_str();
    app->add_option("--gamma-ray", p.gamma_ray, "Ray power decay constant gamma (ns)")->capture_default_str();
    app->add_option("--lambda-cluster", p.lambda_cluster, "Cluster arrival rate (1/ns)")->capture_default_str();
    app->add_option("--lambda-ray", p.lambda_ray, "Ray arrival rate (1/ns)")->capture_default_str();
    app->add_option("--power-00", p.power_00, "Mean power of the first ray (linear)")->capture_default_str();
    app->add_option("--clusters-max", p.num_clusters_max, "Upper bound on drawn clusters")
        ->capture_default_str();
    app->add_option("--horizon", p.horizon, "Latest ray delay (ns)")->capture_default_str();
    app->add_option("--cluster-horizon", p.cluster_horizon, "Latest cluster arrival (ns), 0 = horizon")
        ->capture_default_str();
    app->add_option("--noise-power", p.noise_power, "Complex noise variance per frequency point")
        ->capture_default_str();
    app->add_option("--rays", c.rays, "Ray arrivals: dense (one per delay_quantum) or poisson")
        ->check(CLI::IsMember({"dense", "poisson"}));
    app->add_option("--delay-quantum", p.delay_quantum, "Snap delays to multiples of this (ns), 0 = off")
        ->capture_default_str();
    app->add_option("--min-clusters", sc.constraints.min_clusters, "Reject draws with fewer clusters")
        ->capture_default_str();
    app->add_option("--max-clusters", sc.constraints.max_clusters, "Reject draws with more clusters")
        ->capture_default_str();
    app->add_option("--min-jump-db", sc.constraints.min_jump_db, "Reject draws with a weaker onset jump (dB)")
        ->capture_default_str();
    app->add_option("--f-start", sc.grid.f_start, "First frequency (Hz)")->capture_default_str();
    app->add_option("--f-step", sc.grid.f_step, "Frequency step (Hz)")->capture_default_str();
    app->add_option("--points", sc.grid.count, "Frequency points")->capture_default_str();
}

void add_pdp_options(CLI::App* app, Cli& c) {
    auto& p = c.cfg.pdp;
    app->add_option("--window", c.window, "Sweep window: blackman or rectangular")
        ->check(CLI::IsMember({"blackman", "rectangular"}));
    app->add_option("--tail-fraction", p.tail_fraction, "Trailing fraction used for the noise floor")
        ->capture_default_str();
    app->add_option("--margin-db", p.margin_db, "Keep bins this far above the noise floor")
        ->capture_default_str();
    app->add_option("--guard-bins", p.guard_bins, "Trailing bins skipped by the truncation scan")
        ->capture_default_str();
}

void add_kmeans_options(CLI::App* app, Cli& c) {
    auto& k = c.cfg.kmeans;
    app->add_option("--k", c.k, "Cluster count, or 'truth' to use the true count");
    app->add_option("--restarts", k.restarts, "k-means++ restarts")->capture_default_str();
    app->add_option("--kmeans-delay-scale", k.delay_scale, "Multiplier on the delay feature")
        ->capture_default_str();
    app->add_option("--kmeans-power-scale", k.power_scale, "Multiplier on the power feature")
        ->capture_default_str();
    app->add_flag("--kmeans-no-standardize", c.no_standardize,
                  "Use raw (bin, dB) features instead of z-scored ones");
}

void add_sparse_options(CLI::App* app, Cli& c) {
    auto& s = c.cfg.sparse;
    app->add_option("--l-max", s.l_max, "Weighted curvature budget L_max")->capture_default_str();
    app->add_option("--epsilon", s.epsilon, "Reweighting stabilizer")->capture_default_str();
    app->add_option("--outer-iters", s.max_outer_iters, "Reweighting iterations M")->capture_default_str();
    app->add_option("--weight-tol", s.weight_tol, "Stop when weights change less than this")
        ->capture_default_str();
    app->add_option("--threshold", s.threshold, "Decision level on the pivot vector (dB/bin^2)")
        ->capture_default_str();
    app->add_option("--threshold-mode", c.threshold_mode, "signed (phi <= thr) or abs (|phi| >= |thr|)")
        ->check(CLI::IsMember({"signed", "abs"}));
    app->add_option("--min-separation", s.min_separation, "Merge crossings closer than this (bins)")
        ->capture_default_str();
    app->add_option("--weight-mode", c.weight_mode, "curvature or paper-literal")
        ->check(CLI::IsMember({"curvature", "paper-literal"}));
    app->add_option("--rho", s.solver.rho, "Initial ADMM penalty")->capture_default_str();
    app->add_option("--inner-iters", s.solver.max_inner_iters, "ADMM iteration cap")->capture_default_str();
    app->add_option("--primal-tol", s.solver.primal_tol, "ADMM primal residual tolerance")
        ->capture_default_str();
    app->add_option("--dual-tol", s.solver.dual_tol, "ADMM dual residual tolerance")->capture_default_str();
}

void add_fit_options(CLI::App* app, Cli& c) {
    app->add_option("--peak-mode", c.peak_mode, "Cluster peak: max-bin or first-bin")
        ->check(CLI::IsMember({"max-bin", "first-bin"}));
}

// Applies the string-typed options to the config.
void finalize(Cli& c) {
    auto& cfg = c.cfg;
    if (!c.window.empty()) cfg.pdp.window = parse_window(c.window);
    if (!c.rays.empty()) {
        cfg.scenario.params.ray_arrivals = c.rays == "dense" ? RayArrivals::Dense : RayArrivals::Poisson;
    }
    if (c.fixed_fading) cfg.scenario.redraw_fading = false;
    if (c.no_standardize) cfg.kmeans.standardize = false;
    if (!c.threshold_mode.empty()) {
        cfg.sparse.threshold_mode = c.threshold_mode == "abs" ? ThresholdMode::Absolute : ThresholdMode::Signed;
    }
    if (!c.weight_mode.empty()) {
        cfg.sparse.weight_mode = c.weight_mode == "paper-literal" ? WeightMode::PaperLiteral : WeightMode::Curvature;
    }
    if (!c.peak_mode.empty()) cfg.peak_mode = c.peak_mode == "first-bin" ? PeakMode::FirstBin : PeakMode::MaxBin;
    if (!c.k.empty()) {
        if (c.k == "truth") {
            cfg.kmeans_k_from_truth = true;
        } else {
            try {
                std::size_t used = 0;
                const long long v = std::stoll(c.k, &used);
                if (used != c.k.size() || v < 1) throw std::invalid_argument("k");
                cfg.kmeans.k = static_cast<std::size_t>(v);
                cfg.kmeans_k_from_truth = false;
            } catch (const std::exception&) {
                throw InputError("cli-io", "--k must be a positive count or 'truth'");
            }
        }
    }
    if (!c.emit.empty()) {
        cfg.emit.clear();
        for (const auto& e : c.emit) cfg.emit.insert(parse_emit(e));
    }
    if (!c.input.empty()) cfg.input = c.input;
    if (!c.truth.empty()) cfg.truth = c.truth;
}

bool given(const CLI::App* sub, const char* name) { return sub->get_option(name)->count() > 0; }

// Settings taken from the command line or the config file.
struct Explicit {
    bool l_max = false;
    bool k = false;
};

// Measured data has no scenario to calibrate against, so these must be explicit.
void require_explicit(const Explicit& ex, bool truth_known) {
    if (!ex.l_max) {
        throw InputError("cli-io", "--l-max is required for measured data (it is scenario dependent)");
    }
    if (!ex.k && !truth_known) {
        throw InputError("cli-io", "--k is required when no truth labels are given");
    }
}

void say(const Cli& c, const std::string& line) {
    if (!c.quiet) std::cout << line << "\n";
}

void warn(const Cli& c, const std::vector<std::string>& warnings) {
    if (c.quiet) return;
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

std::string fixed(double v, int digits = 3) {
    if (!std::isfinite(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string fit_table(const SvFit& fit) {
    std::string out = "cluster  start  end   gamma_ns  r2     status\n";
    for (std::size_t i = 0; i < fit.rays.size(); ++i) {
        const auto& r = fit.rays[i];
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-8zu %-6zu %-5zu %-9s %-6s %s\n", i, r.segment.start, r.segment.end,
                      std::isfinite(r.gamma_ns) ? fixed(r.gamma_ns, 2).c_str() : "-",
                      fixed(r.line.r2, 3).c_str(), to_string(r.status).c_str());
        out += buf;
    }
    out += "Gamma_hat (ns): " + (fit.gamma_cluster_hat ? fixed(*fit.gamma_cluster_hat, 2) : std::string("-")) + "\n";
    out += "gamma_hat (ns): " + (fit.gamma_ray_hat ? fixed(*fit.gamma_ray_hat, 2) : std::string("-")) + "\n";
    out += "P00_hat (dB):   " + (fit.power_00_hat_db ? fixed(*fit.power_00_hat_db, 2) : std::string("-")) + "\n";
    if (!fit.note.empty()) out += "note: " + fit.note + "\n";
    return out;
}

std::string metrics_line(const char* name, const PartitionMetrics& m) {
    return std::string(name) + ": precision " + fixed(m.precision) + ", recall " + fixed(m.recall) +
           ", found " + std::to_string(m.found) + ", truth " + std::to_string(m.truth) + ", mean offset " +
           fixed(m.mean_offset, 2) + " bins";
}

int cmd_synth(Cli& c) {
    auto& cfg = c.cfg;
    cfg.scenario.validate();
    const auto header = make_header(cfg);
    const auto real = generate_conditioned(cfg.scenario.params, cfg.scenario.constraints,
                                           derive_seed(cfg.seed, 1));
    const auto sweeps =
        synthetic_sweeps(real, cfg.scenario.grid, cfg.scenario.ensemble, derive_seed(cfg.seed, 2),
                         cfg.scenario.redraw_fading);
    const auto onsets = onset_bins(real, cfg.scenario.grid.delay_step());

    std::error_code ec;
    fs::create_directories(cfg.output_dir / "sweeps", ec);
    if (ec) throw IoError("cli-io", cfg.output_dir.string() + ": cannot create directory");
    std::vector<std::pair<fs::path, std::string>> files;
    nlohmann::json scenario = to_json(real);
    scenario["header"] = header_json(header);
    scenario["truth_onset_bins"] = onsets;
    scenario["onset_jumps_db"] = onset_jumps_db(real);
    files.emplace_back(cfg.output_dir / "scenario.json", scenario.dump(2) + "\n");
    files.emplace_back(cfg.output_dir / "truth.csv", format_truth_csv(onsets, cfg.scenario.grid.count, header));
    for (std::size_t m = 0; m < sweeps.size(); ++m) {
        char name[32];
        std::snprintf(name, sizeof name, "sweep_%04zu.csv", m);
        files.emplace_back(cfg.output_dir / "sweeps" / name, format_sweep_csv(sweeps[m], header));
    }
    write_files_atomic(files);
    say(c, "clusters: " + std::to_string(onsets.size()) + ", sweeps: " + std::to_string(sweeps.size()) +
               ", written to " + cfg.output_dir.string());
    return 0;
}

int cmd_pdp(Cli& c) {
    auto& cfg = c.cfg;
    if (cfg.input == "synthetic") throw InputError("cli-io", "pdp needs --input <sweep file or directory>");
    cfg.validate();
    std::vector<std::string> warnings;
    const auto pdp = build_pdp(cfg, &warnings);
    warn(c, warnings);
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    write_file_atomic(cfg.output_dir / "pdp.csv", format_pdp_csv(pdp, make_header(cfg)));
    say(c, "bins: " + std::to_string(pdp.size()) + ", noise floor " + fixed(pdp.noise_floor_db.value_or(NAN), 2) +
               " dB, written to " + (cfg.output_dir / "pdp.csv").string());
    return 0;
}

PowerDelayProfile read_pdp(const std::string& path, const RunConfig& cfg) {
    auto pdp = parse_pdp_csv(read_text_file(path), path);
    if (cfg.truth) {
        auto onsets = parse_truth_csv(read_text_file(*cfg.truth), cfg.truth->string());
        std::erase_if(onsets, [&](std::size_t b) { return b >= pdp.size(); });
        pdp.truth_onsets = std::move(onsets);
    }
    return pdp;
}

int cmd_cluster(Cli& c, const Explicit& ex) {
    auto& cfg = c.cfg;
    if (cfg.input == "synthetic") throw InputError("cli-io", "cluster needs --input <pdp.csv>");
    cfg.validate();
    if (!ex.k && cfg.truth) cfg.kmeans_k_from_truth = true;
    require_explicit(ex, cfg.truth.has_value());
    auto result = analyze_pdp(read_pdp(cfg.input, cfg), cfg);
    cfg.emit = {Emit::Reconstruction, Emit::Phi, Emit::Partitions, Emit::Metrics};
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    write_files_atomic(render_artifacts(result, cfg));
    say(c, "sparse clusters: " + std::to_string(result.sparse_partition.segments.size()) +
               ", k-means segments: " + std::to_string(result.kmeans_partition.segments.size()));
    if (result.sparse_metrics) say(c, metrics_line("sparse", *result.sparse_metrics));
    if (result.kmeans_metrics) say(c, metrics_line("k-means", *result.kmeans_metrics));
    return 0;
}

int cmd_fit(Cli& c) {
    auto& cfg = c.cfg;
    const auto pdp = parse_pdp_csv(read_text_file(c.pdp_file), c.pdp_file);
    const auto part = parse_partition_csv(read_text_file(c.partition_file), c.partition_file);
    if (!is_valid_partition(part, pdp.size())) {
        throw InputError("cluster-fit", c.partition_file + ": partition does not tile the " +
                                            std::to_string(pdp.size()) + "-bin profile");
    }
    const auto fit = fit_sv(pdp, part, cfg.peak_mode);
    auto j = fit_to_json(fit);
    j["header"] = header_json(make_header(cfg));
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    write_file_atomic(cfg.output_dir / "fit.json", j.dump(2) + "\n");
    if (!c.quiet) std::cout << fit_table(fit);
    return 0;
}

int cmd_eval(Cli& c, std::size_t slack) {
    auto& cfg = c.cfg;
    if (!cfg.truth) throw InputError("cli-io", "eval needs --truth <truth.csv>");
    const auto part = parse_partition_csv(read_text_file(c.partition_file), c.partition_file);
    auto truth = parse_truth_csv(read_text_file(*cfg.truth), cfg.truth->string());
    std::erase_if(truth, [&](std::size_t b) { return b >= part.size(); });
    const auto m = evaluate_partition(part, truth, slack);
    nlohmann::json j = metrics_to_json(m);
    j["header"] = header_json(make_header(cfg));
    j["slack_bins"] = slack;
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    write_file_atomic(cfg.output_dir / "eval.json", j.dump(2) + "\n");
    say(c, metrics_line(to_string(part.method).c_str(), m));
    return 0;
}

int cmd_run(Cli& c, const Explicit& ex) {
    auto& cfg = c.cfg;
    const bool synthetic = cfg.input == "synthetic";
    cfg.validate();
    if (!ex.k && (synthetic || cfg.truth)) cfg.kmeans_k_from_truth = true;
    if (!synthetic) require_explicit(ex, cfg.truth.has_value());
    const auto result = run_pipeline(cfg);
    warn(c, result.warnings);
    say(c, "bins: " + std::to_string(result.pdp.size()) + ", sparse clusters: " +
               std::to_string(result.sparse_partition.segments.size()) + ", k-means segments: " +
               std::to_string(result.kmeans_partition.segments.size()));
    if (result.sparse_metrics) say(c, metrics_line("sparse", *result.sparse_metrics));
    if (result.kmeans_metrics) say(c, metrics_line("k-means", *result.kmeans_metrics));
    if (result.fit.gamma_cluster_hat || result.fit.gamma_ray_hat) {
        say(c, "Gamma_hat " + (result.fit.gamma_cluster_hat ? fixed(*result.fit.gamma_cluster_hat, 2) : "-") +
                   " ns, gamma_hat " + (result.fit.gamma_ray_hat ? fixed(*result.fit.gamma_ray_hat, 2) : "-") + " ns");
    }
    for (const auto& f : result.written) say(c, "wrote " + f.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Cli c;
    bool config_has_l_max = false;
    bool config_has_k = false;
    try {
        if (auto path = find_config_arg(argc, argv)) {
            const auto text = read_text_file(*path);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                throw InputError("cli-io", *path + ": " + e.what());
            }
            merge_json(c.cfg, j);
            config_has_l_max = j.contains("sparse") && j.at("sparse").contains("l_max");
            config_has_k = j.contains("kmeans") && j.at("kmeans").contains("k");
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    }

    CLI::App app{"Cluster analysis of channel power delay profiles: reweighted l1 sparse clustering "
                 "against a k-means baseline, with Saleh-Valenzuela parameter fits."};
    app.set_version_flag("--version", PDPC_VERSION);
    app.require_subcommand(1);
    app.fallthrough();
    std::string out_dir;
    app.add_option("--seed", c.cfg.seed, "Random seed")->capture_default_str();
    app.add_option("--config", c.config_path, "JSON run configuration (flags override it)");
    app.add_option("--out", out_dir, "Output directory");
    app.add_flag("-q,--quiet", c.quiet, "Suppress progress output and warnings");

    auto* synth = app.add_subcommand("synth", "Draw a scenario; write sweeps, scenario.json and truth.csv");
    add_scenario_options(synth, c);

    auto* pdp = app.add_subcommand("pdp", "Sweeps -> windowed IDFT -> averaged, truncated PDP (pdp.csv)");
    pdp->add_option("--input", c.input, "Sweep file or directory (.csv, .s2p, optionally .gz)")->required();
    pdp->add_option("--truth", c.truth, "Truth labels CSV (bin_index,cluster_id)");
    add_pdp_options(pdp, c);

    auto* cluster = app.add_subcommand("cluster", "PDP -> sparse and k-means partitions");
    cluster->add_option("--input", c.input, "PDP CSV written by 'pdp'")->required();
    cluster->add_option("--truth", c.truth, "Truth labels CSV for evaluation");
    add_kmeans_options(cluster, c);
    add_sparse_options(cluster, c);

    auto* fit = app.add_subcommand("fit", "Fit Gamma and gamma to a clustered PDP (fit.json)");
    fit->add_option("--pdp", c.pdp_file, "PDP CSV")->required();
    fit->add_option("--partition", c.partition_file, "Partition CSV")->required();
    add_fit_options(fit, c);

    std::size_t slack = c.cfg.eval_slack;
    auto* eval = app.add_subcommand("eval", "Score a partition against truth onsets (eval.json)");
    eval->add_option("--partition", c.partition_file, "Partition CSV")->required();
    eval->add_option("--truth", c.truth, "Truth labels CSV")->required();
    eval->add_option("--slack", slack, "Matching tolerance (bins)")->capture_default_str();

    auto* run = app.add_subcommand("run", "Full pipeline from sweeps or the synthetic scenario");
    run->add_option("--input", c.input, "Sweep file/directory, or 'synthetic'");
    run->add_option("--truth", c.truth, "Truth labels CSV for evaluation");
    run->add_option("--emit", c.emit, "Artifacts: pdp, reconstruction, phi, partitions, fit, metrics")
        ->delimiter(',');
    run->add_option("--slack", c.cfg.eval_slack, "Matching tolerance (bins)")->capture_default_str();
    add_scenario_options(run, c);
    add_pdp_options(run, c);
    add_kmeans_options(run, c);
    add_sparse_options(run, c);
    add_fit_options(run, c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitInput;
    }

    try {
        finalize(c);
        if (!out_dir.empty()) c.cfg.output_dir = out_dir;
        if (synth->parsed()) return cmd_synth(c);
        if (pdp->parsed()) return cmd_pdp(c);
        if (cluster->parsed()) {
            return cmd_cluster(c, {config_has_l_max || given(cluster, "--l-max"),
                                   config_has_k || given(cluster, "--k")});
        }
        if (fit->parsed()) return cmd_fit(c);
        if (eval->parsed()) return cmd_eval(c, slack);
        if (run->parsed()) {
            return cmd_run(c, {config_has_l_max || given(run, "--l-max"), config_has_k || given(run, "--k")});
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: cli-io: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return 0;
}
