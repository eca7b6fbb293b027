#include "pdpc/pipeline.hpp"

#include <cmath>
#include <future>

#include "pdpc/error.hpp"
#include "pdpc/transform.hpp"

namespace pdpc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStage = "cli-io";

// Independent RNG streams derived from the run seed.
constexpr std::uint64_t kScenarioStream = 1;
constexpr std::uint64_t kEnsembleStream = 2;
constexpr std::uint64_t kKmeansStream = 3;

void require(bool ok, const std::string& what) {
    if (!ok) throw InputError(kStage, what);
}

json optional_number(const std::optional<double>& v) {
    if (!v || !std::isfinite(*v)) return nullptr;
    return *v;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string threshold_mode_name(ThresholdMode m) {
    return m == ThresholdMode::Signed ? "signed" : "abs";
}

std::string weight_mode_name(WeightMode m) {
    return m == WeightMode::Curvature ? "curvature" : "paper-literal";
}

std::string peak_mode_name(PeakMode m) { return m == PeakMode::MaxBin ? "max-bin" : "first-bin"; }

template <typename T>
void take(const json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

}  // namespace

std::string to_string(Emit e) {
    switch (e) {
        case Emit::Pdp: return "pdp";
        case Emit::Reconstruction: return "reconstruction";
        case Emit::Phi: return "phi";
        case Emit::Partitions: return "partitions";
        case Emit::Fit: return "fit";
        case Emit::Metrics: return "metrics";
    }
    return "?";
}

Emit parse_emit(const std::string& name) {
    for (const Emit e : all_emits()) {
        if (to_string(e) == name) return e;
    }
    throw InputError(kStage, "unknown emit '" + name +
                                 "' (expected pdp, reconstruction, phi, partitions, fit, metrics)");
}

std::set<Emit> all_emits() {
    return {Emit::Pdp, Emit::Reconstruction, Emit::Phi, Emit::Partitions, Emit::Fit, Emit::Metrics};
}

SvParams ScenarioConfig::default_scenario_params() {
    SvParams p;
    p.ray_arrivals = RayArrivals::Dense;
    p.delay_quantum = FrequencyGrid{}.delay_step() * 1e9;
    p.cluster_horizon = 60.0;
    p.noise_power = 0.01;
    return p;
}

void ScenarioConfig::validate() const {
    params.validate();
    require(ensemble >= 1, "ensemble must be >= 1");
    require(grid.count >= 2 && grid.f_step > 0.0, "scenario grid needs >= 2 points and a positive step");
    require(constraints.min_clusters >= 1 && constraints.min_clusters <= constraints.max_clusters,
            "scenario cluster bounds must satisfy 1 <= min <= max");
}

void PdpConfig::validate() const {
    require(tail_fraction > 0.0 && tail_fraction <= 1.0, "tail-fraction must be in (0, 1]");
    require(margin_db >= 0.0, "margin-db must be >= 0");
}

void RunConfig::validate() const {
    require(!emit.empty(), "emit set is empty");
    if (input == "synthetic") {
        scenario.validate();
    } else {
        std::error_code ec;
        require(fs::exists(input, ec), input + ": no such file or directory");
    }
    if (truth) {
        std::error_code ec;
        require(fs::exists(*truth, ec), truth->string() + ": no such file");
    }
    pdp.validate();
    kmeans.validate();
    sparse.validate();
}

json to_json(const RunConfig& cfg) {
    const auto& sc = cfg.scenario;
    const auto& sp = cfg.sparse;
    const auto& km = cfg.kmeans;
    json emit = json::array();
    for (const Emit e : cfg.emit) emit.push_back(to_string(e));
    return {
        {"input", cfg.input},
        {"truth", cfg.truth ? json(cfg.truth->string()) : json(nullptr)},
        {"seed", cfg.seed},
        {"scenario",
         {{"params", to_json(sc.params)},
          {"constraints",
           {{"min_clusters", sc.constraints.min_clusters},
            {"max_clusters", sc.constraints.max_clusters},
            {"min_jump_db", sc.constraints.min_jump_db},
            {"max_attempts", sc.constraints.max_attempts}}},
          {"grid", {{"f_start_hz", sc.grid.f_start}, {"f_step_hz", sc.grid.f_step}, {"points", sc.grid.count}}},
          {"ensemble", sc.ensemble},
          {"redraw_fading", sc.redraw_fading}}},
        {"pdp",
         {{"window", to_string(cfg.pdp.window)},
          {"tail_fraction", cfg.pdp.tail_fraction},
          {"margin_db", cfg.pdp.margin_db},
          {"guard_bins", cfg.pdp.guard_bins}}},
        {"kmeans",
         {{"k", cfg.kmeans_k_from_truth ? json("truth") : json(km.k)},
          {"restarts", km.restarts},
          {"max_iters", km.max_iters},
          {"tol", km.tol},
          {"delay_scale", km.delay_scale},
          {"power_scale", km.power_scale},
          {"standardize", km.standardize}}},
        {"sparse",
         {{"l_max", sp.l_max},
          {"epsilon", sp.epsilon},
          {"outer_iters", sp.max_outer_iters},
          {"weight_tol", sp.weight_tol},
          {"threshold", sp.threshold},
          {"threshold_mode", threshold_mode_name(sp.threshold_mode)},
          {"min_separation", sp.min_separation},
          {"weight_mode", weight_mode_name(sp.weight_mode)},
          {"rho", sp.solver.rho},
          {"inner_iters", sp.solver.max_inner_iters},
          {"primal_tol", sp.solver.primal_tol},
          {"dual_tol", sp.solver.dual_tol}}},
        {"fit", {{"peak_mode", peak_mode_name(cfg.peak_mode)}}},
        {"eval", {{"slack", cfg.eval_slack}}},
        {"output_dir", cfg.output_dir.string()},
        {"emit", emit},
    };
}

void merge_json(RunConfig& cfg, const json& j) {
    try {
        require(j.is_object(), "config must be a JSON object");
        take(j, "input", cfg.input);
        if (j.contains("truth")) {
            if (j.at("truth").is_null()) cfg.truth.reset();
            else cfg.truth = j.at("truth").get<std::string>();
        }
        take(j, "seed", cfg.seed);
        if (j.contains("scenario")) {
            const auto& s = j.at("scenario");
            auto& sc = cfg.scenario;
            if (s.contains("params")) {
                json merged = to_json(sc.params);
                merged.update(s.at("params"));
                sc.params = sv_params_from_json(merged);
            }
            if (s.contains("constraints")) {
                const auto& c = s.at("constraints");
                take(c, "min_clusters", sc.constraints.min_clusters);
                take(c, "max_clusters", sc.constraints.max_clusters);
                take(c, "min_jump_db", sc.constraints.min_jump_db);
                take(c, "max_attempts", sc.constraints.max_attempts);
            }
            if (s.contains("grid")) {
                const auto& g = s.at("grid");
                take(g, "f_start_hz", sc.grid.f_start);
                take(g, "f_step_hz", sc.grid.f_step);
                take(g, "points", sc.grid.count);
            }
            take(s, "ensemble", sc.ensemble);
            take(s, "redraw_fading", sc.redraw_fading);
        }
        if (j.contains("pdp")) {
            const auto& p = j.at("pdp");
            if (p.contains("window")) cfg.pdp.window = parse_window(p.at("window").get<std::string>());
            take(p, "tail_fraction", cfg.pdp.tail_fraction);
            take(p, "margin_db", cfg.pdp.margin_db);
            take(p, "guard_bins", cfg.pdp.guard_bins);
        }
        if (j.contains("kmeans")) {
            const auto& k = j.at("kmeans");
            if (k.contains("k")) {
                if (k.at("k").is_string()) {
                    require(k.at("k").get<std::string>() == "truth", "kmeans.k must be a count or \"truth\"");
                    cfg.kmeans_k_from_truth = true;
                } else {
                    cfg.kmeans.k = k.at("k").get<std::size_t>();
                    cfg.kmeans_k_from_truth = false;
                }
            }
            take(k, "restarts", cfg.kmeans.restarts);
            take(k, "max_iters", cfg.kmeans.max_iters);
            take(k, "tol", cfg.kmeans.tol);
            take(k, "delay_scale", cfg.kmeans.delay_scale);
            take(k, "power_scale", cfg.kmeans.power_scale);
            take(k, "standardize", cfg.kmeans.standardize);
        }
        if (j.contains("sparse")) {
            const auto& s = j.at("sparse");
            auto& sp = cfg.sparse;
            take(s, "l_max", sp.l_max);
            take(s, "epsilon", sp.epsilon);
            take(s, "outer_iters", sp.max_outer_iters);
            take(s, "weight_tol", sp.weight_tol);
            take(s, "threshold", sp.threshold);
            if (s.contains("threshold_mode")) {
                const auto m = s.at("threshold_mode").get<std::string>();
                require(m == "signed" || m == "abs", "threshold_mode must be 'signed' or 'abs'");
                sp.threshold_mode = m == "signed" ? ThresholdMode::Signed : ThresholdMode::Absolute;
            }
            take(s, "min_separation", sp.min_separation);
            if (s.contains("weight_mode")) {
                const auto m = s.at("weight_mode").get<std::string>();
                require(m == "curvature" || m == "paper-literal",
                        "weight_mode must be 'curvature' or 'paper-literal'");
                sp.weight_mode = m == "curvature" ? WeightMode::Curvature : WeightMode::PaperLiteral;
            }
            take(s, "rho", sp.solver.rho);
            take(s, "inner_iters", sp.solver.max_inner_iters);
            take(s, "primal_tol", sp.solver.primal_tol);
            take(s, "dual_tol", sp.solver.dual_tol);
        }
        if (j.contains("fit") && j.at("fit").contains("peak_mode")) {
            const auto m = j.at("fit").at("peak_mode").get<std::string>();
            require(m == "max-bin" || m == "first-bin", "peak_mode must be 'max-bin' or 'first-bin'");
            cfg.peak_mode = m == "max-bin" ? PeakMode::MaxBin : PeakMode::FirstBin;
        }
        if (j.contains("eval")) take(j.at("eval"), "slack", cfg.eval_slack);
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("emit")) {
            cfg.emit.clear();
            for (const auto& e : j.at("emit")) cfg.emit.insert(parse_emit(e.get<std::string>()));
        }
    } catch (const json::exception& e) {
        throw InputError(kStage, std::string("config: ") + e.what());
    }
}

RunConfig load_config(const fs::path& path) {
    const auto text = read_text_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(kStage, path.string() + ": " + e.what());
    }
    RunConfig cfg;
    merge_json(cfg, j);
    return cfg;
}

std::string config_hash(const RunConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output_dir");
    j.erase("emit");
    return hex64(fnv1a64(j.dump()));
}

ArtifactHeader make_header(const RunConfig& cfg) {
    return ArtifactHeader{PDPC_VERSION, config_hash(cfg), cfg.seed};
}

PowerDelayProfile build_pdp(const RunConfig& cfg, std::vector<std::string>* warnings) {
    PowerDelayProfile pdp;
    if (cfg.input == "synthetic") {
        const auto& sc = cfg.scenario;
        sc.validate();
        const auto real = generate_conditioned(sc.params, sc.constraints,
                                               derive_seed(cfg.seed, kScenarioStream));
        SyntheticPdpOptions opts;
        opts.window = cfg.pdp.window;
        opts.redraw_fading = sc.redraw_fading;
        pdp = synthetic_pdp(real, sc.grid, sc.ensemble, derive_seed(cfg.seed, kEnsembleStream), opts);
        if (warnings) {
            if (auto w = grid_warning(sc.grid)) warnings->push_back(*w);
        }
    } else {
        auto ingest = ingest_sweeps(cfg.input);
        std::vector<ChannelImpulseResponse> cirs;
        cirs.reserve(ingest.sweeps.size());
        for (const auto& s : ingest.sweeps) cirs.push_back(ctf_to_cir(s, cfg.pdp.window));
        pdp = average_pdp(cirs);
        if (warnings) warnings->insert(warnings->end(), ingest.warnings.begin(), ingest.warnings.end());
    }
    if (cfg.truth) {
        auto onsets = parse_truth_csv(read_text_file(*cfg.truth), cfg.truth->string());
        std::erase_if(onsets, [&](std::size_t b) { return b >= pdp.size(); });
        pdp.truth_onsets = std::move(onsets);
    }
    estimate_noise_floor(pdp, cfg.pdp.tail_fraction);
    return truncate_above_noise(pdp, cfg.pdp.margin_db, cfg.pdp.guard_bins);
}

RunResult analyze_pdp(PowerDelayProfile pdp, const RunConfig& cfg) {
    RunResult out;
    FeatureConfig km_cfg = cfg.kmeans;
    if (cfg.kmeans_k_from_truth && pdp.truth_onsets) km_cfg.k = pdp.truth_onsets->size();
    require(km_cfg.k <= pdp.size(), "k exceeds the number of PDP bins after truncation");

    // k-means and sparse clustering are independent given the PDP.
    auto km_future = std::async(std::launch::async, [&] {
        return cluster_kmeans(pdp, km_cfg, derive_seed(cfg.seed, kKmeansStream));
    });
    ReconstructionResult rec;
    try {
        rec = reconstruct(pdp, cfg.sparse);
    } catch (...) {
        km_future.wait();
        throw;
    }
    out.kmeans = km_future.get();
    out.kmeans_partition = kmeans_to_partition(out.kmeans);
    out.reconstruction = std::move(rec);

    ExtractOptions ex;
    ex.threshold = cfg.sparse.threshold;
    ex.mode = cfg.sparse.threshold_mode;
    ex.min_separation = cfg.sparse.min_separation;
    out.sparse_partition = extract_clusters(out.reconstruction, ex);
    out.fit = fit_sv(pdp, out.sparse_partition, cfg.peak_mode);
    if (pdp.truth_onsets) {
        out.sparse_partition.truth_onsets = pdp.truth_onsets;
        out.kmeans_partition.truth_onsets = pdp.truth_onsets;
        out.sparse_metrics = evaluate_partition(out.sparse_partition, *pdp.truth_onsets, cfg.eval_slack);
        out.kmeans_metrics = evaluate_partition(out.kmeans_partition, *pdp.truth_onsets, cfg.eval_slack);
    }
    out.pdp = std::move(pdp);
    return out;
}

RunResult run_pipeline(const RunConfig& cfg) {
    cfg.validate();
    std::vector<std::string> warnings;
    auto pdp = build_pdp(cfg, &warnings);
    auto result = analyze_pdp(std::move(pdp), cfg);
    result.warnings = std::move(warnings);

    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    if (ec) throw IoError(kStage, cfg.output_dir.string() + ": cannot create directory (" + ec.message() + ")");
    auto files = render_artifacts(result, cfg);
    write_files_atomic(files);
    for (const auto& f : files) result.written.push_back(f.first);
    return result;
}

json metrics_to_json(const PartitionMetrics& m) {
    return {{"precision", m.precision},
            {"recall", m.recall},
            {"mean_offset_bins", m.mean_offset},
            {"mean_abs_offset_bins", m.mean_abs_offset},
            {"matched", m.matched},
            {"found", m.found},
            {"truth", m.truth}};
}

json diagnostics_to_json(const ReconstructionResult& rec) {
    json inner = json::array();
    for (const auto& d : rec.inner_diagnostics) {
        inner.push_back({{"iterations", d.iterations},
                         {"primal_residual", d.primal_residual},
                         {"dual_residual", d.dual_residual},
                         {"rho", d.rho},
                         {"weighted_norm", d.weighted_norm},
                         {"rounding_bound", d.rounding_bound},
                         {"l_max", d.l_max},
                         {"objective", d.objective},
                         {"constraint_active", d.constraint_active},
                         {"free_coordinates", d.free_coordinates}});
    }
    return {{"outer_iterations", rec.outer_iterations},
            {"weights_converged", rec.weights_converged},
            {"objective", rec.objective},
            {"objective_monotone", rec.objective_monotone},
            {"inner", inner}};
}

json fit_to_json(const SvFit& fit) {
    json rays = json::array();
    for (const auto& r : fit.rays) {
        rays.push_back({{"start_bin", r.segment.start},
                        {"end_bin", r.segment.end},
                        {"slope_db_per_ns", r.line.slope},
                        {"intercept_db", r.line.intercept},
                        {"r2", r.line.r2},
                        {"gamma_ns", finite_or_null(r.gamma_ns)},
                        {"status", to_string(r.status)}});
    }
    json clusters = nullptr;
    if (fit.clusters) {
        const auto& c = *fit.clusters;
        clusters = {{"gamma_ns", finite_or_null(c.gamma_cluster_ns)},
                    {"decaying", c.decaying},
                    {"power_00_db", c.power_00_db},
                    {"r2", c.r2},
                    {"onset_delays_ns", c.onset_delays_ns},
                    {"peak_db", c.peak_db}};
    }
    return {{"gamma_cluster_hat_ns", optional_number(fit.gamma_cluster_hat)},
            {"gamma_ray_hat_ns", optional_number(fit.gamma_ray_hat)},
            {"power_00_hat_db", optional_number(fit.power_00_hat_db)},
            {"onset_delays_ns", fit.onset_delays_ns},
            {"residual_db", fit.residual_db},
            {"note", fit.note},
            {"clusters", clusters},
            {"rays", rays}};
}

std::vector<std::pair<fs::path, std::string>> render_artifacts(const RunResult& r, const RunConfig& cfg) {
    const auto header = make_header(cfg);
    const auto& dir = cfg.output_dir;
    std::vector<std::pair<fs::path, std::string>> files;
    const auto& emit = cfg.emit;
    if (emit.count(Emit::Pdp)) files.emplace_back(dir / "pdp.csv", format_pdp_csv(r.pdp, header));
    if (emit.count(Emit::Reconstruction)) {
        files.emplace_back(dir / "phat.csv",
                           format_phat_csv(r.reconstruction.p_hat, r.pdp.delay_step, header));
    }
    if (emit.count(Emit::Phi)) {
        files.emplace_back(dir / "phi.csv",
                           format_phi_csv(r.reconstruction.phi, cfg.sparse.threshold, header));
    }
    if (emit.count(Emit::Partitions)) {
        files.emplace_back(dir / "partition_kmeans.csv", format_partition_csv(r.kmeans_partition, header));
        files.emplace_back(dir / "partition_sparse.csv", format_partition_csv(r.sparse_partition, header));
    }
    if (emit.count(Emit::Fit)) {
        json j = fit_to_json(r.fit);
        j["header"] = header_json(header);
        files.emplace_back(dir / "fit.json", j.dump(2) + "\n");
    }
    if (emit.count(Emit::Metrics)) {
        json j;
        j["header"] = header_json(header);
        j["bins"] = r.pdp.size();
        j["noise_floor_db"] = optional_number(r.pdp.noise_floor_db);
        j["truth_onsets"] = r.pdp.truth_onsets ? json(*r.pdp.truth_onsets) : json(nullptr);
        j["sparse"] = {{"onsets", r.sparse_partition.onsets},
                       {"clusters", r.sparse_partition.segments.size()},
                       {"evaluation", r.sparse_metrics ? metrics_to_json(*r.sparse_metrics) : json(nullptr)},
                       {"diagnostics", diagnostics_to_json(r.reconstruction)}};
        j["kmeans"] = {{"k", r.kmeans.centroids.size()},
                       {"segments", r.kmeans_partition.segments.size()},
                       {"wcss", r.kmeans.wcss},
                       {"iterations", r.kmeans.iterations},
                       {"converged", r.kmeans.converged},
                       {"evaluation", r.kmeans_metrics ? metrics_to_json(*r.kmeans_metrics) : json(nullptr)}};
        j["warnings"] = r.warnings;
        files.emplace_back(dir / "metrics.json", j.dump(2) + "\n");
    }
    return files;
}

}  // namespace pdpc
