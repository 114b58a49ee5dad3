#include "tvstarma/config.hpp"

#include "tvstarma/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace tvstarma {

using json = nlohmann::ordered_json;

namespace {

/// Read access to one JSON object that remembers which keys were consumed.
class Reader {
public:
    Reader(const json& j, std::string context) : j_(j), context_(std::move(context)) {
        if (!j_.is_object()) throw ValidationError(context_ + ": expected a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    template <class T>
    T get(const std::string& key, T fallback) {
        used_.insert(key);
        if (!j_.contains(key)) return fallback;
        return as<T>(j_.at(key), key);
    }

    template <class T>
    T require(const std::string& key) {
        used_.insert(key);
        if (!j_.contains(key)) throw ValidationError(context_ + ": missing key '" + key + "'");
        return as<T>(j_.at(key), key);
    }

    const json* child(const std::string& key) {
        used_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string path(const std::string& key) const { return context_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!used_.count(it.key())) throw ValidationError(context_ + ": unknown key '" + it.key() + "'");
        }
    }

private:
    template <class T>
    T as(const json& v, const std::string& key) const {
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ValidationError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v.is_string()) throw ValidationError("");
            } else if constexpr (std::is_same_v<T, std::uint64_t>) {
                if (!v.is_number_unsigned()) throw ValidationError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v.is_number_integer()) throw ValidationError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v.is_number()) throw ValidationError("");
            }
            return v.get<T>();
        } catch (const std::exception&) {
            throw ValidationError(context_ + ": key '" + key + "' has the wrong type");
        }
    }

    const json& j_;
    std::string context_;
    std::set<std::string> used_;
};

Reader top_level(const json& j, std::string_view command) {
    Reader r(j, "config");
    const int version = r.require<int>("schema_version");
    if (version != kConfigSchemaVersion) {
        throw ValidationError("config: unsupported schema_version " + std::to_string(version));
    }
    const std::string cmd = r.require<std::string>("command");
    if (cmd != command) throw ValidationError("config: command is '" + cmd + "', expected '" + std::string(command) + "'");
    return r;
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
}

json header(std::string_view command) {
    json j;
    j["schema_version"] = kConfigSchemaVersion;
    j["command"] = std::string(command);
    return j;
}

std::string dump(const json& j) {
    // Sorted keys make the rendering independent of construction order.
    const nlohmann::json sorted = nlohmann::json::parse(j.dump());
    return sorted.dump(2) + "\n";
}

ModelSpec model_from(const json& j, const std::string& ctx) {
    Reader r(j, ctx);
    ModelSpec spec;
    spec.p = r.get<int>("p", spec.p);
    spec.lambda = r.get<std::vector<int>>("lambda", std::vector<int>(static_cast<std::size_t>(std::max(spec.p, 0)), 1));
    spec.q = r.get<int>("q", 0);
    spec.m = r.get<std::vector<int>>("m", std::vector<int>(static_cast<std::size_t>(std::max(spec.q, 0)), 1));
    spec.J = r.get<int>("J", spec.J);
    spec.family = parse_wavelet_family(r.get<std::string>("family", to_string(spec.family)));
    r.finish();
    spec.validate(1);
    return spec;
}

json model_to(const ModelSpec& s) {
    return json{{"p", s.p}, {"lambda", s.lambda}, {"q", s.q}, {"m", s.m}, {"J", s.J}, {"family", to_string(s.family)}};
}

WeightScheme weights_from(const json& j, const std::string& ctx) {
    Reader r(j, ctx);
    WeightScheme w;
    w.kind = parse_weight_kind(r.get<std::string>("scheme", to_string(w.kind)));
    w.alpha = r.get<double>("alpha", w.alpha);
    w.scale = parse_distance_scale(r.get<std::string>("distance_scale", to_string(w.scale)));
    r.finish();
    if (!(w.alpha > 0.0)) throw ValidationError(ctx + ": alpha must be positive");
    return w;
}

json weights_to(const WeightScheme& w) {
    return json{{"scheme", to_string(w.kind)}, {"alpha", w.alpha}, {"distance_scale", to_string(w.scale)}};
}

KalmanConfig kalman_from(const json& j, const std::string& ctx) {
    Reader r(j, ctx);
    KalmanConfig k;
    k.h = r.get<double>("h", k.h);
    k.t0 = r.get<int>("t0", k.t0);
    k.p0_scale = r.get<double>("p0_scale", k.p0_scale);
    k.freeze_sigma = r.get<bool>("freeze_sigma", k.freeze_sigma);
    k.divergence_bound = r.get<double>("divergence_bound", k.divergence_bound);
    k.trace = r.get<bool>("trace", k.trace);
    r.finish();
    k.validate();
    return k;
}

json kalman_to(const KalmanConfig& k) {
    return json{{"h", k.h},
                {"t0", k.t0},
                {"p0_scale", k.p0_scale},
                {"freeze_sigma", k.freeze_sigma},
                {"divergence_bound", k.divergence_bound},
                {"trace", k.trace}};
}

GneitingCovarianceSpec grf_from(const json& j, const std::string& ctx) {
    Reader r(j, ctx);
    GneitingCovarianceSpec g;
    g.sigma2 = r.get<double>("sigma2", g.sigma2);
    g.zeta = r.get<double>("zeta", g.zeta);
    g.delta = r.get<double>("delta", g.delta);
    g.gamma = r.get<double>("gamma", g.gamma);
    g.nugget = r.get<double>("nugget", g.nugget);
    g.d = r.get<int>("d", g.d);
    r.finish();
    g.validate();
    return g;
}

json grf_to(const GneitingCovarianceSpec& g) {
    return json{{"sigma2", g.sigma2}, {"zeta", g.zeta}, {"delta", g.delta},
                {"gamma", g.gamma},   {"nugget", g.nugget}, {"d", g.d}};
}

BoundingBox box_from(const json& j, const std::string& ctx) {
    Reader r(j, ctx);
    BoundingBox b;
    b.lat_min = r.get<double>("lat_min", b.lat_min);
    b.lat_max = r.get<double>("lat_max", b.lat_max);
    b.lon_min = r.get<double>("lon_min", b.lon_min);
    b.lon_max = r.get<double>("lon_max", b.lon_max);
    r.finish();
    if (!(b.lat_min < b.lat_max && b.lon_min < b.lon_max)) throw ValidationError(ctx + ": empty bounding box");
    return b;
}

json box_to(const BoundingBox& b) {
    return json{{"lat_min", b.lat_min}, {"lat_max", b.lat_max}, {"lon_min", b.lon_min}, {"lon_max", b.lon_max}};
}

FitSpec fit_from(const json& j, const std::string& ctx) {
    Reader r(j, ctx);
    FitSpec f;
    if (const json* m = r.child("model")) f.model = model_from(*m, r.path("model"));
    const std::string method = r.get<std::string>("method", "auto");
    f.method = method == "auto" ? default_method(f.model) : parse_fit_method(method);
    if (const json* w = r.child("weights")) f.weights = weights_from(*w, r.path("weights"));
    if (const json* k = r.child("kalman")) f.kalman = kalman_from(*k, r.path("kalman"));
    r.finish();
    return f;
}

json fit_to(const FitSpec& f) {
    return json{{"model", model_to(f.model)},
                {"method", to_string(f.method)},
                {"weights", weights_to(f.weights)},
                {"kalman", kalman_to(f.kalman)}};
}

void require_positive(int v, const char* what) {
    if (v < 1) throw ValidationError(std::string("config: ") + what + " must be >= 1");
}

}  // namespace

CoefficientPreset parse_preset(std::string_view name) {
    if (name == "group1") return CoefficientPreset::Group1;
    if (name == "group2") return CoefficientPreset::Group2;
    throw ValidationError("unknown coefficient preset '" + std::string(name) + "' (expected group1, group2)");
}

FitMethod parse_fit_method(std::string_view name) {
    if (name == "ls") return FitMethod::LeastSquares;
    if (name == "kalman") return FitMethod::Kalman;
    throw ValidationError("unknown fit method '" + std::string(name) + "' (expected ls, kalman)");
}

std::vector<WeightScheme> comparison_weight_schemes() {
    return {{WeightKind::InverseDistance, 0.5, DistanceScale::ArcDegrees},
            {WeightKind::InverseDistance, 1.0, DistanceScale::ArcDegrees},
            {WeightKind::NegativeExponential, 0.5, DistanceScale::ArcDegrees},
            {WeightKind::NegativeExponential, 1.0, DistanceScale::ArcDegrees},
            {WeightKind::NegativeExponential, 2.0, DistanceScale::ArcDegrees}};
}

void FitConfig::validate() const {
    if (panel.empty()) throw ValidationError("config: fit needs a panel");
    if (geometry.empty() && weights_file.empty()) throw ValidationError("config: fit needs a geometry or a weights_file");
    model.validate(1);
    kalman.validate();
    if (!(weights.alpha > 0.0)) throw ValidationError("config: alpha must be positive");
}

FitSpec FitConfig::fit_spec() const {
    FitSpec f;
    f.model = model;
    f.method = method.value_or(default_method(model));
    f.weights = weights;
    f.kalman = kalman;
    return f;
}

SimulateConfig parse_simulate_config(std::string_view text) {
    const json j = parse_json(text);
    Reader r = top_level(j, "simulate");
    SimulateConfig c;
    c.generator = parse_generator_kind(r.get<std::string>("generator", to_string(c.generator)));
    c.preset = parse_preset(r.get<std::string>("preset", c.generator == GeneratorKind::TvStarma ? "group2" : "group1"));
    c.sigma2 = r.get<double>("sigma2", c.sigma2);
    if (const json* g = r.child("grf")) c.grf = grf_from(*g, "config.grf");
    c.grf_scale = parse_distance_scale(r.get<std::string>("grf_distance_scale", to_string(c.grf_scale)));
    c.T = r.get<int>("T", c.T);
    c.n = r.get<int>("n", c.n);
    c.geometry = r.get<std::string>("geometry", "");
    if (const json* b = r.child("box")) c.box = box_from(*b, "config.box");
    c.geometry_seed = r.get<std::uint64_t>("geometry_seed", c.geometry_seed);
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    r.finish();
    require_positive(c.T - 1, "T - 1");
    require_positive(c.n - 1, "n - 1");
    if (!(c.sigma2 >= 0.0)) throw ValidationError("config: sigma2 must be >= 0");
    if (c.generator == GeneratorKind::TvStar && c.preset == CoefficientPreset::Group2) {
        throw ValidationError("config: group2 has MA terms; use generator tvstarma");
    }
    return c;
}

std::string render_config(const SimulateConfig& c) {
    json j = header("simulate");
    j["generator"] = to_string(c.generator);
    j["preset"] = to_string(c.preset);
    j["sigma2"] = c.sigma2;
    j["grf"] = grf_to(c.grf);
    j["grf_distance_scale"] = to_string(c.grf_scale);
    j["T"] = c.T;
    j["n"] = c.n;
    j["geometry"] = c.geometry;
    j["box"] = box_to(c.box);
    j["geometry_seed"] = c.geometry_seed;
    j["seed"] = c.seed;
    return dump(j);
}

FitConfig parse_fit_config(std::string_view text) {
    const json j = parse_json(text);
    Reader r = top_level(j, "fit");
    FitConfig c;
    c.panel = r.get<std::string>("panel", "");
    c.geometry = r.get<std::string>("geometry", "");
    c.weights_file = r.get<std::string>("weights_file", "");
    if (const json* m = r.child("model")) c.model = model_from(*m, "config.model");
    const std::string method = r.get<std::string>("method", "auto");
    if (method != "auto") c.method = parse_fit_method(method);
    if (const json* w = r.child("weights")) c.weights = weights_from(*w, "config.weights");
    if (const json* k = r.child("kalman")) c.kalman = kalman_from(*k, "config.kalman");
    c.log10 = r.get<bool>("log10", c.log10);
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    r.finish();
    return c;
}

std::string render_config(const FitConfig& c) {
    json j = header("fit");
    j["panel"] = c.panel;
    j["geometry"] = c.geometry;
    j["weights_file"] = c.weights_file;
    j["model"] = model_to(c.model);
    j["method"] = c.method ? to_string(*c.method) : "auto";
    j["weights"] = weights_to(c.weights);
    j["kalman"] = kalman_to(c.kalman);
    j["log10"] = c.log10;
    j["seed"] = c.seed;
    return dump(j);
}

StudyConfig default_study_config(GeneratorKind generator) {
    StudyConfig c;
    auto& d = c.design;
    d.generator.kind = generator;
    d.n = 15;
    d.M = 50;
    if (generator == GeneratorKind::Grf) {
        d.T = 512;
        d.generator.grf_grid = comparison_grf_grid();
        d.keep_curves = false;
        for (const ModelSpec& model : {ModelSpec::tvstar(1, {1}, 2), ModelSpec::tvstarma(1, {1}, 1, {1}, 2)}) {
            for (const WeightScheme& w : comparison_weight_schemes()) {
                FitSpec f;
                f.model = model;
                f.method = default_method(model);
                f.weights = w;
                d.fit_specs.push_back(f);
            }
        }
    } else {
        d.T = 1024;
        d.generator.preset = generator == GeneratorKind::TvStar ? CoefficientPreset::Group1 : CoefficientPreset::Group2;
        FitSpec f;
        f.model = generator == GeneratorKind::TvStar ? ModelSpec::tvstar(1, {1}, 2)
                                                     : ModelSpec::tvstarma(1, {1}, 1, {1}, 2);
        f.method = default_method(f.model);
        f.weights = WeightScheme{WeightKind::InverseDistance, 0.5, DistanceScale::ArcDegrees};
        d.fit_specs.push_back(f);
    }
    return c;
}

void apply_full_scale(StudyConfig& c) {
    c.full_scale = true;
    c.design.T = 1024;
    c.design.M = c.design.generator.kind == GeneratorKind::Grf ? 500 : 1000;
}

StudyConfig parse_study_config(std::string_view text) {
    const json j = parse_json(text);
    Reader r = top_level(j, "study");
    GeneratorKind kind = GeneratorKind::Grf;
    const json* gen = r.child("generator");
    if (gen) {
        if (!gen->is_object()) throw ValidationError("config.generator: expected a JSON object");
        if (gen->contains("kind")) {
            if (!gen->at("kind").is_string()) throw ValidationError("config.generator: key 'kind' has the wrong type");
            kind = parse_generator_kind(gen->at("kind").get<std::string>());
        }
    }
    StudyConfig c = default_study_config(kind);
    auto& d = c.design;
    if (gen) {
        Reader g(*gen, "config.generator");
        (void)g.get<std::string>("kind", "");
        if (kind != GeneratorKind::Grf) d.generator.preset = parse_preset(g.get<std::string>("preset", to_string(d.generator.preset)));
        d.generator.sigma2 = g.get<double>("sigma2", d.generator.sigma2);
        d.generator.grf_scale = parse_distance_scale(g.get<std::string>("distance_scale", to_string(d.generator.grf_scale)));
        if (const json* grid = g.child("grf_grid")) {
            if (!grid->is_array()) throw ValidationError("config.generator.grf_grid: expected an array");
            d.generator.grf_grid.clear();
            for (std::size_t i = 0; i < grid->size(); ++i) {
                d.generator.grf_grid.push_back(grf_from(grid->at(i), "config.generator.grf_grid[" + std::to_string(i) + "]"));
            }
        }
        g.finish();
    }
    if (const json* fits = r.child("fits")) {
        if (!fits->is_array()) throw ValidationError("config.fits: expected an array");
        d.fit_specs.clear();
        for (std::size_t i = 0; i < fits->size(); ++i) {
            d.fit_specs.push_back(fit_from(fits->at(i), "config.fits[" + std::to_string(i) + "]"));
        }
    }
    d.M = r.get<int>("M", d.M);
    d.T = r.get<int>("T", d.T);
    d.n = r.get<int>("n", d.n);
    d.base_seed = r.get<std::uint64_t>("base_seed", d.base_seed);
    c.geometry = r.get<std::string>("geometry", "");
    if (const json* b = r.child("box")) d.box = box_from(*b, "config.box");
    d.geometry_seed = r.get<std::uint64_t>("geometry_seed", d.geometry_seed);
    d.keep_curves = r.get<bool>("keep_curves", d.keep_curves);
    const bool full = r.get<bool>("full_scale", false);
    r.finish();
    if (full) apply_full_scale(c);
    if (c.geometry.empty()) d.validate();
    return c;
}

std::string render_config(const StudyConfig& c) {
    const auto& d = c.design;
    json j = header("study");
    json gen{{"kind", to_string(d.generator.kind)},
             {"sigma2", d.generator.sigma2},
             {"distance_scale", to_string(d.generator.grf_scale)}};
    if (d.generator.kind != GeneratorKind::Grf) {
        gen["preset"] = to_string(d.generator.preset);
    }
    json grid = json::array();
    for (const auto& g : d.generator.grf_grid) grid.push_back(grf_to(g));
    gen["grf_grid"] = grid;
    j["generator"] = gen;
    json fits = json::array();
    for (const auto& f : d.fit_specs) fits.push_back(fit_to(f));
    j["fits"] = fits;
    j["M"] = d.M;
    j["T"] = d.T;
    j["n"] = d.n;
    j["base_seed"] = d.base_seed;
    j["geometry"] = c.geometry;
    j["box"] = box_to(d.box);
    j["geometry_seed"] = d.geometry_seed;
    j["keep_curves"] = d.keep_curves;
    j["full_scale"] = c.full_scale;
    return dump(j);
}

WeightsConfig parse_weights_config(std::string_view text) {
    const json j = parse_json(text);
    Reader r = top_level(j, "weights");
    WeightsConfig c;
    c.geometry = r.require<std::string>("geometry");
    if (const json* w = r.child("weights")) c.weights = weights_from(*w, "config.weights");
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    r.finish();
    return c;
}

std::string render_config(const WeightsConfig& c) {
    json j = header("weights");
    j["geometry"] = c.geometry;
    j["weights"] = weights_to(c.weights);
    j["seed"] = c.seed;
    return dump(j);
}

IngestConfig parse_ingest_config(std::string_view text) {
    const json j = parse_json(text);
    Reader r = top_level(j, "ingest");
    IngestConfig c;
    c.records = r.require<std::string>("records");
    c.geometry = r.require<std::string>("geometry");
    if (const json* w = r.child("window")) {
        Reader wr(*w, "config.window");
        const Date first = parse_date(wr.require<std::string>("first"));
        const Date last = parse_date(wr.require<std::string>("last"));
        wr.finish();
        if (std::chrono::sys_days(last) < std::chrono::sys_days(first)) {
            throw ValidationError("config.window: last precedes first");
        }
        c.window = DateWindow{first, last};
    }
    c.log10 = r.get<bool>("log10", c.log10);
    c.seed = r.get<std::uint64_t>("seed", c.seed);
    r.finish();
    return c;
}

std::string render_config(const IngestConfig& c) {
    json j = header("ingest");
    j["records"] = c.records;
    j["geometry"] = c.geometry;
    if (c.window) j["window"] = json{{"first", format_date(c.window->first)}, {"last", format_date(c.window->last)}};
    j["log10"] = c.log10;
    j["seed"] = c.seed;
    return dump(j);
}

}  // namespace tvstarma
