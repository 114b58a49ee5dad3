#include "tvstarma/report.hpp"

#include "tvstarma/io.hpp"

#include <json.hpp>

#include <cmath>

namespace tvstarma {

using json = nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
    return a;
}

json provenance_json(const Provenance& p) {
    json inputs = json::array();
    for (const auto& [path, hash] : p.inputs) inputs.push_back(json{{"path", path}, {"sha256", hash}});
    return json{{"command", p.command},
                {"config_sha256", p.config_sha256},
                {"inputs", inputs},
                {"seed", p.seed},
                {"version", kVersion}};
}

}  // namespace

std::string render_fit_json(const FitResult& fit, const FitSpec& spec, int T, int n,
                            const std::vector<std::string>& station_ids, const Provenance& provenance) {
    json j;
    j["schema_version"] = 1;
    j["kind"] = "fit_result";
    j["spec"] = json{{"p", fit.spec.p},
                     {"lambda", fit.spec.lambda},
                     {"q", fit.spec.q},
                     {"m", fit.spec.m},
                     {"J", fit.spec.J},
                     {"family", to_string(fit.spec.family)},
                     {"label", fit.spec.label()}};
    j["method"] = to_string(fit.method);
    j["weights"] = json{{"scheme", to_string(spec.weights.kind)},
                        {"alpha", spec.weights.alpha},
                        {"distance_scale", to_string(spec.weights.scale)}};
    j["T"] = T;
    j["n"] = n;
    j["stations"] = station_ids;
    j["first_time"] = fit.first_time;
    j["beta_hat"] = vector_json(fit.coefficients);
    json curves = json::array();
    auto add = [&](const std::vector<CoefficientCurve>& list, const char* kind) {
        for (const auto& c : list) {
            curves.push_back(json{{"kind", kind}, {"s", c.lag.s}, {"l", c.lag.l}, {"values", vector_json(c.values)}});
        }
    };
    add(fit.ar_curves, "phi");
    add(fit.ma_curves, "theta");
    j["curves"] = curves;
    j["sigma2_hat"] = number(fit.sigma2_hat);
    j["mse"] = number(fit.mse);
    j["warnings"] = fit.warnings;
    j["provenance"] = provenance_json(provenance);
    return j.dump(2) + "\n";
}

std::string render_study_meta(const StudyResult& result, const StudyDesign& design, const Provenance& provenance) {
    json j;
    j["schema_version"] = 1;
    j["kind"] = "study_meta";
    j["generator"] = to_string(design.generator.kind);
    j["M"] = design.M;
    j["T"] = design.T;
    j["n"] = result.geometry.size();
    j["base_seed"] = design.base_seed;
    j["geometry_seed"] = design.geometry_seed;
    j["replicate_seeds"] = result.replicate_seeds;
    json cells = json::array();
    long long excluded = 0;
    for (const auto& c : result.cells) {
        excluded += c.excluded;
        cells.push_back(json{{"cell", result.generator_labels[static_cast<std::size_t>(c.generator_cell)]},
                             {"fit", result.fit_labels[static_cast<std::size_t>(c.fit_index)]},
                             {"mse", number(c.mse)},
                             {"included", c.included},
                             {"excluded", c.excluded},
                             {"exclusion_reasons", c.exclusion_reasons}});
    }
    j["cells"] = cells;
    j["total_exclusions"] = excluded;
    j["stations"] = result.geometry.ids();
    j["provenance"] = provenance_json(provenance);
    return j.dump(2) + "\n";
}

std::string render_ingest_report(const IngestReport& report, const Provenance& provenance) {
    json dropped = json::array();
    for (const auto& d : report.dropped) dropped.push_back(json{{"id", d.id}, {"reason", d.reason}});
    json j;
    j["schema_version"] = 1;
    j["kind"] = "ingest_report";
    j["window"] = json{{"first", format_date(report.window.first)}, {"last", format_date(report.window.last)}};
    j["T"] = (std::chrono::sys_days(report.window.last) - std::chrono::sys_days(report.window.first)).count() + 1;
    j["kept"] = report.kept;
    j["dropped"] = dropped;
    j["ignored_records"] = report.ignored_records;
    j["provenance"] = provenance_json(provenance);
    return j.dump(2) + "\n";
}

std::string render_timing(const std::vector<std::pair<std::string, double>>& entries) {
    json j = json::object();
    for (const auto& [k, v] : entries) j[k] = v;
    return j.dump(2) + "\n";
}

}  // namespace tvstarma
