#include "tvstarma/cli.hpp"

#include "tvstarma/config.hpp"
#include "tvstarma/error.hpp"
#include "tvstarma/evaluation.hpp"
#include "tvstarma/io.hpp"
#include "tvstarma/kalman.hpp"
#include "tvstarma/ls.hpp"
#include "tvstarma/report.hpp"
#include "tvstarma/simulation.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>

namespace fs = std::filesystem;

namespace tvstarma {

namespace {

std::string absolute_path(const std::string& p) { return p.empty() ? p : fs::absolute(p).lexically_normal().string(); }

/// Output files are collected first and written only after the command has succeeded.
struct Outputs {
    std::vector<std::pair<std::string, std::string>> files;
    void add(std::string name, std::string text) { files.emplace_back(std::move(name), std::move(text)); }
    void write(const fs::path& dir) const {
        fs::create_directories(dir);
        for (const auto& [name, text] : files) write_text_file(dir / name, text);
    }
};

int parse_int(const std::string& v, std::string_view what) {
    const double d = parse_double(v, what);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ValidationError(std::string(what) + ": expected an integer");
    return static_cast<int>(d);
}

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "Output directory")->required();
    cmd->add_option("--seed", c.seed, "Base random seed");
}

std::string base_config(const Common& c, std::string_view command) {
    if (!c.config.empty()) return read_text_file(c.config);
    return "{\"schema_version\": 1, \"command\": \"" + std::string(command) + "\"}";
}

/// Model and weight flags shared by `fit` and `weights`.
struct ModelFlags {
    std::optional<int> p, q, J;
    std::vector<int> lambda, m;
    std::optional<std::string> scheme, scale, method;
    std::optional<double> alpha, h, p0_scale;
    bool trace = false;
};

void add_weight_flags(CLI::App* cmd, ModelFlags& f) {
    cmd->add_option("--scheme", f.scheme, "inverse_distance (di) or negative_exponential (ne)");
    cmd->add_option("--alpha", f.alpha, "Weight decay parameter");
    cmd->add_option("--distance-scale", f.scale, "km, degrees or normalized");
}

void apply_weight_flags(const ModelFlags& f, WeightScheme& w) {
    if (f.scheme) w.kind = parse_weight_kind(*f.scheme);
    if (f.alpha) w.alpha = *f.alpha;
    if (f.scale) w.scale = parse_distance_scale(*f.scale);
    if (!(w.alpha > 0.0)) throw ValidationError("alpha must be positive");
}

StationGeometry geometry_for(const SimulateConfig& c) {
    return c.geometry.empty() ? random_geometry(c.n, c.box, c.geometry_seed) : read_geometry_csv(c.geometry);
}

int cmd_simulate(const Common& common, const std::map<std::string, std::string>& overrides, Outputs& out) {
    SimulateConfig cfg = parse_simulate_config(base_config(common, "simulate"));
    if (common.seed) cfg.seed = *common.seed;
    for (const auto& [k, v] : overrides) {
        if (k == "generator") cfg.generator = parse_generator_kind(v);
        if (k == "preset") cfg.preset = parse_preset(v);
        if (k == "T") cfg.T = parse_int(v, "--T");
        if (k == "n") cfg.n = parse_int(v, "--n");
        if (k == "sigma2") cfg.sigma2 = parse_double(v, "--sigma2");
        if (k == "gamma") cfg.grf.gamma = parse_double(v, "--gamma");
        if (k == "delta") cfg.grf.delta = parse_double(v, "--delta");
        if (k == "geometry") cfg.geometry = v;
    }
    if (overrides.count("generator") && !overrides.count("preset") && cfg.generator != GeneratorKind::Grf) {
        cfg.preset = cfg.generator == GeneratorKind::TvStarma ? CoefficientPreset::Group2 : CoefficientPreset::Group1;
    }
    cfg.geometry = absolute_path(cfg.geometry);
    if (!cfg.geometry.empty()) cfg.n = read_geometry_csv(cfg.geometry).size();
    const std::string resolved = render_config(cfg);
    cfg = parse_simulate_config(resolved);
    const StationGeometry geom = geometry_for(cfg);
    PanelSeries panel;
    if (cfg.generator == GeneratorKind::Grf) {
        panel = simulate_grf(geom, cfg.T, cfg.grf, cfg.seed, cfg.grf_scale);
    } else {
        const auto W = WeightMatrixSet::from_geometry(geom, WeightScheme{WeightKind::InverseDistance, 0.5});
        const CoefficientFunctions funcs = cfg.preset == CoefficientPreset::Group2 ? preset_group2() : preset_group1();
        panel = cfg.generator == GeneratorKind::TvStar
                    ? simulate_tvstar(funcs, W, cfg.T, geom.size(), cfg.sigma2, cfg.seed)
                    : simulate_tvstarma(funcs, W, cfg.T, geom.size(), cfg.sigma2, cfg.seed);
        panel.station_ids = geom.ids();
    }
    out.add("config.json", resolved);
    out.add("panel.csv", render_panel_csv(panel));
    out.add("geometry.csv", render_geometry_csv(geom));
    return kExitOk;
}

PanelSeries align_panel_to(const PanelSeries& panel, const StationGeometry& geom, StationGeometry& aligned) {
    std::vector<int> order;
    for (const auto& id : panel.station_ids) {
        int found = -1;
        for (int i = 0; i < geom.size(); ++i)
            if (geom[i].id == id) found = i;
        if (found < 0) throw ValidationError("fit: panel station '" + id + "' is not in the geometry");
        order.push_back(found);
    }
    aligned = geom.subset(order);
    return panel;
}

int cmd_fit(const Common& common, const ModelFlags& flags, const std::map<std::string, std::string>& overrides,
            Outputs& out) {
    FitConfig cfg = parse_fit_config(base_config(common, "fit"));
    if (common.seed) cfg.seed = *common.seed;
    for (const auto& [k, v] : overrides) {
        if (k == "panel") cfg.panel = v;
        if (k == "geometry") cfg.geometry = v;
        if (k == "weights_file") cfg.weights_file = v;
        if (k == "log10") cfg.log10 = v == "true";
    }
    if (flags.p) cfg.model.p = *flags.p;
    if (!flags.lambda.empty()) cfg.model.lambda = flags.lambda;
    else if (flags.p) cfg.model.lambda.assign(static_cast<std::size_t>(std::max(*flags.p, 0)), 1);
    if (flags.q) cfg.model.q = *flags.q;
    if (!flags.m.empty()) cfg.model.m = flags.m;
    else if (flags.q) cfg.model.m.assign(static_cast<std::size_t>(std::max(*flags.q, 0)), 1);
    if (flags.J) cfg.model.J = *flags.J;
    if (flags.method) cfg.method = *flags.method == "auto" ? std::nullopt : std::optional(parse_fit_method(*flags.method));
    apply_weight_flags(flags, cfg.weights);
    if (flags.h) cfg.kalman.h = *flags.h;
    if (flags.p0_scale) cfg.kalman.p0_scale = *flags.p0_scale;
    if (flags.trace) cfg.kalman.trace = true;
    cfg.panel = absolute_path(cfg.panel);
    cfg.geometry = absolute_path(cfg.geometry);
    cfg.weights_file = absolute_path(cfg.weights_file);
    cfg.validate();
    const std::string resolved = render_config(cfg);
    cfg = parse_fit_config(resolved);

    PanelSeries panel = read_panel_csv(cfg.panel);
    if (cfg.log10) panel = log10_transform(panel);
    Provenance prov{"fit", sha256_hex(resolved), {{cfg.panel, sha256_file(cfg.panel)}}, cfg.seed};

    WeightMatrixSet W;
    if (!cfg.weights_file.empty()) {
        const Eigen::MatrixXd w = parse_weights_csv(read_text_file(cfg.weights_file), panel.station_ids);
        W = WeightMatrixSet::from_matrices({w}, cfg.weights);
        prov.inputs.emplace_back(cfg.weights_file, sha256_file(cfg.weights_file));
    } else {
        StationGeometry aligned;
        align_panel_to(panel, read_geometry_csv(cfg.geometry), aligned);
        W = WeightMatrixSet::from_geometry(aligned, cfg.weights);
        prov.inputs.emplace_back(cfg.geometry, sha256_file(cfg.geometry));
    }
    cfg.model.validate(W.max_order());

    const FitSpec spec = cfg.fit_spec();
    const auto dict = shared_dictionary(panel.T(), spec.model.J, spec.model.family);
    FitResult fit;
    if (spec.method == FitMethod::LeastSquares) {
        fit = fit_ls(build_design(panel, W, spec.model, *dict), panel);
    } else {
        KalmanFit kf = fit_kalman(panel, W, spec.model, *dict, spec.kalman);
        fit = std::move(kf.result);
        if (spec.kalman.trace) out.add("trace.csv", render_trace_csv(kf.trace));
    }
    out.add("config.json", resolved);
    out.add("fit.json", render_fit_json(fit, spec, panel.T(), panel.n(), panel.station_ids, prov));

    std::string residuals = "t";
    for (const auto& id : panel.station_ids) residuals += "," + id;
    residuals += "\n";
    for (Eigen::Index r = 0; r < fit.residuals.rows(); ++r) {
        residuals += std::to_string(fit.first_time + r);
        for (Eigen::Index i = 0; i < fit.residuals.cols(); ++i) residuals += "," + format_double(fit.residuals(r, i));
        residuals += "\n";
    }
    out.add("residuals.csv", residuals);
    return kExitOk;
}

int cmd_study(const Common& common, const std::map<std::string, std::string>& overrides, bool full_scale,
              Outputs& out, std::ostream& log) {
    StudyConfig cfg;
    if (common.config.empty()) {
        const GeneratorKind kind =
            overrides.count("generator") ? parse_generator_kind(overrides.at("generator")) : GeneratorKind::Grf;
        cfg = default_study_config(kind);
    } else {
        cfg = parse_study_config(read_text_file(common.config));
    }
    if (common.seed) cfg.design.base_seed = *common.seed;
    for (const auto& [k, v] : overrides) {
        if (k == "M") cfg.design.M = parse_int(v, "--M");
        if (k == "T") cfg.design.T = parse_int(v, "--T");
        if (k == "n") cfg.design.n = parse_int(v, "--n");
        if (k == "geometry") cfg.geometry = v;
    }
    if (full_scale) apply_full_scale(cfg);
    cfg.geometry = absolute_path(cfg.geometry);
    std::optional<StationGeometry> geom;
    if (!cfg.geometry.empty()) {
        geom = read_geometry_csv(cfg.geometry);
        cfg.design.n = geom->size();
    }
    const std::string resolved = render_config(cfg);
    cfg = parse_study_config(resolved);
    cfg.design.geometry = geom;
    cfg.design.validate();

    Provenance prov{"study", sha256_hex(resolved), {}, cfg.design.base_seed};
    if (!cfg.geometry.empty()) prov.inputs.emplace_back(cfg.geometry, sha256_file(cfg.geometry));

    const auto start = std::chrono::steady_clock::now();
    const StudyResult result = run_study(cfg.design);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (auto& [name, text] : render_study_files(result, cfg.design)) out.add(name, std::move(text));
    out.add("config.json", resolved);
    out.add("geometry.csv", render_geometry_csv(result.geometry));
    out.add("study_meta.json", render_study_meta(result, cfg.design, prov));
    out.add("timing.json", render_timing({{"wall_seconds", seconds}}));
    for (const auto& table : mse_tables(result)) log << render_text(table) << '\n';
    return kExitOk;
}

int cmd_weights(const Common& common, const ModelFlags& flags, const std::string& geometry_flag, Outputs& out) {
    std::string base = base_config(common, "weights");
    if (common.config.empty()) {
        if (geometry_flag.empty()) throw ValidationError("weights: --geometry or --config is required");
        base = "{\"schema_version\": 1, \"command\": \"weights\", \"geometry\": \"\"}";
    }
    WeightsConfig cfg = parse_weights_config(base);
    if (!geometry_flag.empty()) cfg.geometry = geometry_flag;
    if (common.seed) cfg.seed = *common.seed;
    apply_weight_flags(flags, cfg.weights);
    cfg.geometry = absolute_path(cfg.geometry);
    const std::string resolved = render_config(cfg);
    cfg = parse_weights_config(resolved);

    const StationGeometry geom = read_geometry_csv(cfg.geometry);
    const Eigen::MatrixXd w = weight_matrix(geom, cfg.weights);
    validate_weight_matrix(w);
    out.add("config.json", resolved);
    out.add("weights.csv", render_weights_csv(w, geom.ids()));
    out.add("row_sums.csv", render_row_sum_report(w, geom.ids()));
    return kExitOk;
}

int cmd_ingest(const Common& common, const std::map<std::string, std::string>& overrides, Outputs& out) {
    std::string base = base_config(common, "ingest");
    if (common.config.empty()) {
        if (!overrides.count("records") || !overrides.count("geometry")) {
            throw ValidationError("ingest: --records and --geometry (or --config) are required");
        }
        base = "{\"schema_version\": 1, \"command\": \"ingest\", \"records\": \"\", \"geometry\": \"\"}";
    }
    IngestConfig cfg = parse_ingest_config(base);
    if (common.seed) cfg.seed = *common.seed;
    if (overrides.count("records")) cfg.records = overrides.at("records");
    if (overrides.count("geometry")) cfg.geometry = overrides.at("geometry");
    if (overrides.count("log10")) cfg.log10 = overrides.at("log10") == "true";
    if (overrides.count("from") != overrides.count("to")) throw ValidationError("ingest: give both --from and --to");
    if (overrides.count("from")) cfg.window = DateWindow{parse_date(overrides.at("from")), parse_date(overrides.at("to"))};
    cfg.records = absolute_path(cfg.records);
    cfg.geometry = absolute_path(cfg.geometry);
    const std::string resolved = render_config(cfg);
    cfg = parse_ingest_config(resolved);

    const IngestResult result = ingest_panel(fs::path(cfg.records), fs::path(cfg.geometry), cfg.window);
    const Provenance prov{"ingest",
                          sha256_hex(resolved),
                          {{cfg.records, sha256_file(cfg.records)}, {cfg.geometry, sha256_file(cfg.geometry)}},
                          cfg.seed};
    out.add("config.json", resolved);
    out.add("panel.csv", render_panel_csv(result.panel));
    if (cfg.log10) out.add("panel_log10.csv", render_panel_csv(log10_transform(result.panel)));
    out.add("geometry.csv", render_geometry_csv(result.geometry));
    out.add("ingest_report.json", render_ingest_report(result.report, prov));
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"tvstarma: wavelet time-varying STAR/STARMA modelling"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Common common;
    ModelFlags flags;
    std::map<std::string, std::string> overrides;
    std::string geometry_flag;
    bool full_scale = false;
    bool no_log10 = false;
    bool log10_flag = false;

    auto string_override = [&](CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
        cmd->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
    };

    CLI::App* simulate = app.add_subcommand("simulate", "Simulate a panel (tvstar, tvstarma or grf)");
    add_common(simulate, common);
    string_override(simulate, "--generator", "generator", "tvstar, tvstarma or grf");
    string_override(simulate, "--preset", "preset", "group1 or group2");
    string_override(simulate, "--T", "T", "Series length");
    string_override(simulate, "--n", "n", "Number of random stations");
    string_override(simulate, "--sigma2", "sigma2", "Innovation variance");
    string_override(simulate, "--gamma", "gamma", "GRF spatial range");
    string_override(simulate, "--delta", "delta", "GRF space-time interaction");
    string_override(simulate, "--geometry", "geometry", "Station geometry csv (default: random)");

    CLI::App* fit = app.add_subcommand("fit", "Fit a tvSTAR (least squares) or tvSTARMA (Kalman) model");
    add_common(fit, common);
    string_override(fit, "--panel", "panel", "Panel csv");
    string_override(fit, "--geometry", "geometry", "Station geometry csv");
    string_override(fit, "--weights-file", "weights_file", "Explicit W(1) csv instead of geometry weights");
    fit->add_option("--method", flags.method, "ls, kalman or auto (ls when q = 0)");
    fit->add_option("--p", flags.p, "AR order");
    fit->add_option("--lambda", flags.lambda, "Spatial orders of the AR lags");
    fit->add_option("--q", flags.q, "MA order");
    fit->add_option("--m", flags.m, "Spatial orders of the MA lags");
    fit->add_option("--J", flags.J, "Wavelet resolution");
    fit->add_option("--kalman-h", flags.h, "Kalman initial innovation scale");
    fit->add_option("--p0-scale", flags.p0_scale, "Kalman initial P scale");
    fit->add_flag("--trace", flags.trace, "Write the per-step Kalman trace");
    fit->add_flag("--log10", log10_flag, "Apply log10(y + 1) before fitting");
    add_weight_flags(fit, flags);

    CLI::App* study = app.add_subcommand("study", "Run a Monte Carlo study and write tables");
    add_common(study, common);
    string_override(study, "--generator", "generator", "grf (weight comparison), tvstar or tvstarma");
    string_override(study, "--M", "M", "Replicates");
    string_override(study, "--T", "T", "Series length");
    string_override(study, "--n", "n", "Stations");
    string_override(study, "--geometry", "geometry", "Station geometry csv (default: random)");
    study->add_flag("--full-scale", full_scale, "M = 1000 (500 for grf) and T = 1024");

    CLI::App* weights = app.add_subcommand("weights", "Write a spatial weight matrix and its row-sum report");
    add_common(weights, common);
    weights->add_option("--geometry", geometry_flag, "Station geometry csv");
    add_weight_flags(weights, flags);

    CLI::App* ingest = app.add_subcommand("ingest", "Build a clean daily panel from station records");
    add_common(ingest, common);
    string_override(ingest, "--records", "records", "Records csv station_id,date,value_tenths_mm");
    string_override(ingest, "--geometry", "geometry", "Station geometry csv");
    string_override(ingest, "--from", "from", "First day, YYYY-MM-DD");
    string_override(ingest, "--to", "to", "Last day, YYYY-MM-DD");
    ingest->add_flag("--no-log10", no_log10, "Skip the log10(y + 1) panel");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        Outputs files;
        int code = kExitOk;
        if (*simulate) {
            code = cmd_simulate(common, overrides, files);
        } else if (*fit) {
            if (log10_flag) overrides["log10"] = "true";
            code = cmd_fit(common, flags, overrides, files);
        } else if (*study) {
            code = cmd_study(common, overrides, full_scale, files, out);
        } else if (*weights) {
            code = cmd_weights(common, flags, geometry_flag, files);
        } else if (*ingest) {
            if (no_log10) overrides["log10"] = "false";
            code = cmd_ingest(common, overrides, files);
        }
        files.write(common.out);
        for (const auto& [name, text] : files.files) out << "wrote " << (fs::path(common.out) / name).string() << '\n';
        return code;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace tvstarma
