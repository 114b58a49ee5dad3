// Acceptance suite: one [PASS]/[FAIL]/[SKIP] line per criterion, nonzero exit on any FAIL.
// TVSTARMA_ACCEPTANCE_ONLY=1,4,9 restricts the run to the listed criteria.

#include "unit/oracles.hpp"

#include "tvstarma/config.hpp"
#include "tvstarma/error.hpp"
#include "tvstarma/evaluation.hpp"
#include "tvstarma/io.hpp"
#include "tvstarma/kalman.hpp"
#include "tvstarma/ls.hpp"
#include "tvstarma/random.hpp"
#include "tvstarma/simulation.hpp"
#include "tvstarma/spatial.hpp"
#include "tvstarma/wavelet.hpp"

#ifdef TVSTARMA_HAVE_CLI
#include "tvstarma/cli.hpp"
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace tvstarma;
namespace fs = std::filesystem;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::Pass : Status::Fail, std::move(detail)}; }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

Eigen::MatrixXd gaussian(int rows, int cols, Rng& rng) {
    std::normal_distribution<double> g;
    return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return g(rng); });
}

StationGeometry midwest(int n, std::uint64_t seed) { return random_geometry(n, {}, seed); }

// 1 ------------------------------------------------------------------------------------------

Outcome ls_oracle_equivalence() {
    Rng rng = make_rng(101);
    const int ns[] = {2, 3, 5};
    const int Ts[] = {32, 64};
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const int n = ns[k % 3];
        const int T = Ts[(k / 3) % 2];
        const int J = 1 + (k / 6) % 2;
        const PanelSeries Z(gaussian(T, n, rng), default_station_ids(n));
        const Eigen::MatrixXd w1 = oracle::random_weights(n, rng);
        const auto W = WeightMatrixSet::from_matrices({w1});
        const auto spec = ModelSpec::tvstar(1, {1}, J);
        const auto fit = fit_ls(build_design(Z, W, spec, build_dictionary(T, J)), Z);
        const Eigen::MatrixXd X = oracle::design(Z.values, w1, 1, {{1, 0}, {1, 1}}, J);
        const Eigen::VectorXd beta = oracle::normal_equations(X, oracle::response(Z.values, 1));
        worst = std::max(worst, (fit.coefficients - beta).norm() / beta.norm());
    }
    return verdict(worst < 1e-6, "200 instances, max relative error " + fmt("%.3e", worst) + " (< 1e-6)");
}

// 2 ------------------------------------------------------------------------------------------

Outcome exact_recovery() {
    Rng rng = make_rng(202);
    std::uniform_real_distribution<double> ua(0.5, 0.9), ub(-0.4, 0.4);
    const int ns[] = {3, 5, 8};
    const int Ts[] = {32, 64};
    double worst_curve = 0.0, worst_ratio = 0.0;
    for (int k = 0; k < 60; ++k) {
        const int n = ns[k % 3];
        const int T = Ts[(k / 3) % 2];
        const int J = 1 + (k / 6) % 2;
        const Eigen::MatrixXd w1 = oracle::random_weights(n, rng);
        const double a = ua(rng), b = ub(rng);
        Eigen::MatrixXd z(T, n);
        z.row(0) = gaussian(1, n, rng);
        for (int t = 1; t < T; ++t) z.row(t) = (a * z.row(t - 1).transpose() + b * w1 * z.row(t - 1).transpose()).transpose();
        const PanelSeries Z(z, default_station_ids(n));
        const auto W = WeightMatrixSet::from_matrices({w1});
        const auto fit = fit_ls(build_design(Z, W, ModelSpec::tvstar(1, {1}, J), build_dictionary(T, J)), Z);
        worst_curve = std::max(worst_curve, (fit.ar_curves[0].values.array() - a).abs().maxCoeff());
        worst_curve = std::max(worst_curve, (fit.ar_curves[1].values.array() - b).abs().maxCoeff());
        const double scale = z.bottomRows(T - 1).squaredNorm() / ((T - 1.0) * n);
        worst_ratio = std::max(worst_ratio, fit.mse / scale);
    }
    return verdict(worst_curve < 1e-8 && worst_ratio < 1e-16,
                   "60 panels, max curve error " + fmt("%.3e", worst_curve) + " (< 1e-8), max mse/scale " +
                       fmt("%.3e", worst_ratio) + " (< 1e-16)");
}

// 3 ------------------------------------------------------------------------------------------

Outcome kalman_ls_equivalence() {
    // Frozen Sigma = h I with P0 = p0 I makes the endpoint the ridge solution with penalty h / p0. These small
    // designs have lambda_min(Psi'Psi) near 1e-2, so p0 = 1e12 keeps that bias near 1e-10.
    Rng rng = make_rng(303);
    const int ns[] = {2, 3, 5};
    const int Ts[] = {32, 64};
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const int n = ns[k % 3];
        const int T = Ts[(k / 3) % 2];
        const int J = 1 + (k / 6) % 2;
        const PanelSeries Z(gaussian(T, n, rng), default_station_ids(n));
        const auto W = WeightMatrixSet::from_matrices({oracle::random_weights(n, rng)});
        const auto spec = ModelSpec::tvstar(1, {1}, J);
        const auto dict = build_dictionary(T, J);
        KalmanConfig cfg;
        cfg.freeze_sigma = true;
        cfg.p0_scale = 1e12;
        const auto kf = fit_kalman(Z, W, spec, dict, cfg);
        const auto ls = fit_ls(build_design(Z, W, spec, dict), Z);
        worst = std::max(worst, (kf.result.coefficients - ls.coefficients).norm() / ls.coefficients.norm());
    }
    return verdict(worst < 1e-6, "50 instances, max relative error " + fmt("%.3e", worst) + " (< 1e-6)");
}

// 4, 5 ---------------------------------------------------------------------------------------

StudyDesign recovery_design(GeneratorKind kind) {
    StudyConfig cfg = default_study_config(kind);
    cfg.design.M = 50;
    cfg.design.T = 1024;
    cfg.design.n = 15;
    cfg.design.base_seed = 1;
    return cfg.design;
}

std::string lag_text(const RecoveryError& e) {
    return std::string(e.moving_average ? "theta" : "phi") + std::to_string(e.lag.s) + std::to_string(e.lag.l);
}

Outcome group1_recovery() {
    const StudyDesign d = recovery_design(GeneratorKind::TvStar);
    const auto r = run_study(d);
    const auto errs = curve_recovery_error(r, 0, 0, preset_group1());
    bool ok = errs.size() == 2 && r.cell(0, 0).included == d.M;
    std::string detail = "Group 1 LS, M=50 T=1024:";
    for (const auto& e : errs) {
        ok = ok && e.trimmed < 0.08;
        detail += " " + lag_text(e) + " " + fmt("%.4f", e.trimmed);
    }
    return verdict(ok, detail + " (< 0.08)");
}

Outcome group2_recovery() {
    const StudyDesign d = recovery_design(GeneratorKind::TvStarma);
    const auto r = run_study(d);
    const auto errs = curve_recovery_error(r, 0, 0, preset_group2());
    bool ok = errs.size() == 4 && r.cell(0, 0).included == d.M;
    std::string detail = "Group 2 Kalman, M=50 T=1024:";
    for (const auto& e : errs) {
        ok = ok && e.trimmed < (e.moving_average ? 0.20 : 0.12);
        detail += " " + lag_text(e) + " " + fmt("%.4f", e.trimmed);
    }
    if (r.cell(0, 0).excluded > 0) detail += " excluded " + std::to_string(r.cell(0, 0).excluded);
    return verdict(ok, detail + " (AR < 0.12, MA < 0.20)");
}

// 6 ------------------------------------------------------------------------------------------

Outcome table_orderings() {
    StudyConfig cfg = default_study_config(GeneratorKind::Grf);
    StudyDesign& d = cfg.design;
    d.M = 50;
    d.T = 512;
    d.base_seed = 1;
    const auto r = run_study(d);
    const int F = static_cast<int>(d.fit_specs.size());
    auto find_fit = [&](bool ma, const std::string& column) {
        for (int f = 0; f < F; ++f)
            if ((d.fit_specs[f].model.q > 0) == ma && r.fit_columns[f] == column) return f;
        throw ValidationError("acceptance: fit " + column + " missing");
    };
    // Cells are gamma-major with delta inner: cell = 3 * gamma_index + delta_index.
    const int star_a05 = find_fit(false, "di_a0.5"), star_a1 = find_fit(false, "di_a1");
    int a_count = 0;
    for (int g = 0; g < 9; ++g) a_count += r.cell(g, star_a1).mse <= r.cell(g, star_a05).mse;

    int chains = 0, b_count = 0;
    for (int f = 0; f < F; ++f)
        for (int gi = 0; gi < 3; ++gi) {
            ++chains;
            const double m0 = r.cell(3 * gi, f).mse, m1 = r.cell(3 * gi + 1, f).mse, m2 = r.cell(3 * gi + 2, f).mse;
            b_count += m0 < m1 && m1 < m2;
        }

    int c_worst = 9;
    std::string c_detail;
    for (const auto& w : comparison_weight_schemes()) {
        const int star = find_fit(false, w.label()), starma = find_fit(true, w.label());
        int count = 0;
        for (int g = 0; g < 9; ++g) count += r.cell(g, starma).mse <= r.cell(g, star).mse;
        c_worst = std::min(c_worst, count);
        c_detail += " " + w.label() + ":" + std::to_string(count);
    }
    int excluded = 0;
    for (const auto& c : r.cells) excluded += c.excluded;

    const bool ok = a_count >= 7 && b_count == chains && c_worst >= 7;
    return verdict(ok, "(a) di a1 <= a0.5 in " + std::to_string(a_count) + "/9 (>= 7); (b) delta chains " +
                           std::to_string(b_count) + "/" + std::to_string(chains) + " (all); (c) tvSTARMA <= tvSTAR" +
                           c_detail + " (each >= 7); excluded fits " + std::to_string(excluded));
}

// 7 ------------------------------------------------------------------------------------------

Outcome mse_scaling() {
    const int M = 100, n = 15, J = 2;
    Eigen::VectorXd b10(4), b11(4);
    b10 << 0.3, 0.08, -0.05, 0.04;
    b11 << -0.2, 0.05, 0.04, -0.06;
    const auto truth = wavelet_coefficients({{{1, 0}, b10}, {{1, 1}, b11}}, J);
    Eigen::VectorXd beta(8);
    for (int b = 0; b < 4; ++b) {
        beta[2 * b] = b10[b];
        beta[2 * b + 1] = b11[b];
    }
    const auto W = WeightMatrixSet::from_geometry(midwest(n, 1), {WeightKind::InverseDistance, 0.5});
    const auto spec = ModelSpec::tvstar(1, {1}, J);
    auto mc_mse = [&](int T) {
        const auto dict = build_dictionary(T, J);
        double acc = 0.0;
        for (int m = 0; m < M; ++m) {
            const auto Z = simulate_tvstar(truth, W, T, n, 1.0, derive_seed(707, m));
            acc += (fit_ls(build_design(Z, W, spec, dict), Z).coefficients - beta).squaredNorm();
        }
        return acc / M;
    };
    const double small = mc_mse(256), large = mc_mse(1024);
    const double ratio = small / large;
    return verdict(ratio >= 2.5 && ratio <= 6.0, "MSE(beta) T=256 " + fmt("%.4e", small) + ", T=1024 " +
                                                     fmt("%.4e", large) + ", ratio " + fmt("%.3f", ratio) +
                                                     " (in [2.5, 6])");
}

// 8 ------------------------------------------------------------------------------------------

Outcome invariant_suites() {
    std::vector<std::string> failures;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok && std::find(failures.begin(), failures.end(), what) == failures.end()) failures.push_back(what);
    };

    for (std::uint64_t s = 0; s < 40; ++s) {
        const int n = 2 + static_cast<int>(s % 14);
        const auto geom = midwest(n, s);
        for (auto scale : {DistanceScale::Kilometres, DistanceScale::ArcDegrees, DistanceScale::MaxNormalized}) {
            const Eigen::MatrixXd d = geom.distance_matrix(scale);
            check((d - d.transpose()).cwiseAbs().maxCoeff() == 0.0, "distance symmetry");
            check(d.diagonal().cwiseAbs().maxCoeff() == 0.0, "distance diagonal");
        }
        for (const auto& w : comparison_weight_schemes()) {
            const Eigen::MatrixXd m = weight_matrix(geom, w);
            check((m.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12, "weight row sums");
            check(m.diagonal().cwiseAbs().maxCoeff() == 0.0, "weight diagonal");
            check(m.minCoeff() >= 0.0, "weight sign");
        }
    }

    for (int J = 1; J <= 6; ++J) {
        const int T = 1024;
        const auto dict = build_dictionary(T, J);
        check(dict.size() == (1 << J), "dictionary column count");
        const auto pairs = oracle::basis_pairs(J);
        double gap = 0.0;
        for (std::size_t c = 0; c < pairs.size(); ++c)
            for (int t = 1; t <= T; ++t)
                gap = std::max(gap, std::abs(dict.values()(t - 1, static_cast<int>(c)) -
                                             oracle::basis(pairs[c].first, pairs[c].second, double(t) / T)));
        // Dilation: psi_{j+1,k}(t/T) = sqrt(2) psi_{j,k}(2t/T) for t <= T/2.
        for (int j = 0; j + 1 < J; ++j)
            for (int k = 0; k < (1 << j); ++k) {
                const int fine = WaveletDictionary::column_index(j + 1, k);
                const int coarse = WaveletDictionary::column_index(j, k);
                for (int t = 1; t <= T / 2; ++t)
                    gap = std::max(gap, std::abs(dict.values()(t - 1, fine) -
                                                 std::sqrt(2.0) * dict.values()(2 * t - 1, coarse)));
            }
        check(gap < 1e-13, "two-scale identity");
    }

    const auto geom = midwest(3, 8);
    const int T = 4, M = 2000;
    GneitingCovarianceSpec spec;
    GrfSampler sampler(geom, T, spec);
    const Eigen::MatrixXd C = sampler.covariance();
    const Eigen::Index N = C.rows();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(N, N);
    for (int m = 0; m < M; ++m) {
        const auto Z = sampler.draw(derive_seed(808, m));
        Eigen::VectorXd x(N);
        for (int t = 0; t < T; ++t)
            for (int i = 0; i < 3; ++i) x[t * 3 + i] = Z.values(t, i);
        acc += x * x.transpose();
    }
    acc /= M;
    double worst_z = 0.0;
    for (Eigen::Index a = 0; a < N; ++a)
        for (Eigen::Index b = 0; b < N; ++b) {
            const double se = std::sqrt((C(a, a) * C(b, b) + C(a, b) * C(a, b)) / M);
            worst_z = std::max(worst_z, std::abs(acc(a, b) - C(a, b)) / se);
        }
    check(worst_z <= 3.0, "GRF covariance within 3 MC standard errors");

    std::string detail = "weights/distances on 40 geometries, dictionary J=1..6, GRF max |z| " + fmt("%.2f", worst_z);
    for (const auto& f : failures) detail += "; FAILED " + f;
    return verdict(failures.empty(), detail);
}

// 9 ------------------------------------------------------------------------------------------

#ifdef TVSTARMA_HAVE_CLI
std::map<std::string, std::string> read_tree(const fs::path& root) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), root).string();
        if (rel != "timing.json") files[rel] = read_text_file(e.path());
    }
    return files;
}

Outcome cli_determinism() {
    const fs::path root = fs::temp_directory_path() / "tvstarma_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto p = [&](const std::string& s) { return (root / s).string(); };

    std::string records = "station_id,date,value_tenths_mm\n";
    Rng rng = make_rng(909);
    std::uniform_int_distribution<int> rain(0, 250);
    const auto ingest_geom = midwest(4, 9);
    for (int i = 0; i < 4; ++i)
        for (int d = 0; d < 60; ++d) {
            const auto day = std::chrono::sys_days(parse_date("2000-01-01")) + std::chrono::days(d);
            records += ingest_geom[i].id + "," + format_date(Date(day)) + "," + std::to_string(rain(rng)) + "\n";
        }
    write_text_file(p("records.csv"), records);
    write_text_file(p("ingest_geometry.csv"), render_geometry_csv(ingest_geom));

    struct Command {
        std::string name;
        std::vector<std::string> args;
    };
    const std::vector<Command> commands{
        {"simulate", {"simulate", "--generator", "tvstarma", "--T", "128", "--n", "6", "--seed", "5"}},
        {"fit", {"fit", "--panel", p("simulate_a/panel.csv"), "--geometry", p("simulate_a/geometry.csv"), "--q", "1",
                 "--m", "1", "--trace"}},
        {"study", {"study", "--generator", "grf", "--M", "2", "--T", "32", "--n", "4", "--seed", "3"}},
        {"weights", {"weights", "--geometry", p("simulate_a/geometry.csv"), "--scheme", "ne", "--alpha", "2"}},
        {"ingest",
         {"ingest", "--records", p("records.csv"), "--geometry", p("ingest_geometry.csv"), "--from", "2000-01-05",
          "--to", "2000-02-20"}},
    };
    std::vector<std::string> failed;
    for (const auto& c : commands) {
        std::ostringstream out, err;
        auto first = c.args;
        first.insert(first.begin(), "tvstarma");
        first.insert(first.end(), {"--out", p(c.name + "_a")});
        const int rc1 = run_cli(first, out, err);
        const int rc2 = run_cli({"tvstarma", c.name, "--config", p(c.name + "_a/config.json"), "--out", p(c.name + "_b")}, out, err);
        if (rc1 != 0 || rc2 != 0 || read_tree(p(c.name + "_a")) != read_tree(p(c.name + "_b"))) {
            failed.push_back(c.name + " (exit " + std::to_string(rc1) + "/" + std::to_string(rc2) + ") " + err.str());
        }
    }
    fs::remove_all(root);
    std::string detail = "simulate, fit, study, weights, ingest re-run from config.json";
    for (const auto& f : failed) detail += "; differs: " + f;
    return verdict(failed.empty(), detail);
}
#endif

// 10 -----------------------------------------------------------------------------------------

Outcome precipitation_magnitude() {
    const char* panel_path = std::getenv("TVSTARMA_PRECIP_PANEL");
    const char* geom_path = std::getenv("TVSTARMA_PRECIP_GEOMETRY");
    if (!panel_path || !geom_path) {
        return {Status::Skip, "set TVSTARMA_PRECIP_PANEL (raw daily panel csv, tenths of mm) and "
                              "TVSTARMA_PRECIP_GEOMETRY to run"};
    }
    const auto geom = read_geometry_csv(geom_path);
    const auto raw = read_panel_csv(panel_path);
    if (raw.station_ids != geom.ids()) throw ValidationError("precipitation panel columns must match the geometry order");
    const auto Z = log10_transform(raw);
    const std::vector<ModelSpec> rows{ModelSpec::tvstar(1, {1}, 2), ModelSpec::tvstar(1, {1}, 3),
                                      ModelSpec::tvstar(1, {1}, 4), ModelSpec::tvstarma(1, {1}, 1, {1}, 2),
                                      ModelSpec::tvstarma(1, {1}, 1, {1}, 3)};
    const auto schemes = comparison_weight_schemes();
    int minimizer = 0;
    bool in_range = true;
    std::string detail;
    for (const auto& spec : rows) {
        double best = INFINITY;
        std::string best_label;
        for (const auto& w : schemes) {
            FitSpec f;
            f.model = spec;
            f.method = default_method(spec);
            f.weights = w;
            const double mse = fit_panel(Z, WeightMatrixSet::from_geometry(geom, w), f).mse;
            in_range = in_range && mse >= 1e-5 && mse <= 1e-3;
            if (mse < best) {
                best = mse;
                best_label = w.label();
            }
        }
        minimizer += best_label == "di_a1";
        detail += " " + spec.label() + "->" + best_label + fmt("(%.3e)", best);
    }
    return verdict(in_range && minimizer >= 3, "n=" + std::to_string(Z.n()) + " T=" + std::to_string(Z.T()) +
                                                   "; di_a1 minimizes " + std::to_string(minimizer) + "/5 rows;" +
                                                   detail);
}

}  // namespace

int main() {
    std::set<int> only;
    if (const char* sel = std::getenv("TVSTARMA_ACCEPTANCE_ONLY")) {
        std::stringstream ss(sel);
        std::string item;
        while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"LS oracle equivalence", ls_oracle_equivalence},
        {"exact recovery", exact_recovery},
        {"Kalman/LS equivalence", kalman_ls_equivalence},
        {"Group 1 curve recovery", group1_recovery},
        {"Group 2 curve recovery", group2_recovery},
        {"weight-matrix table orderings", table_orderings},
        {"estimator MSE scaling", mse_scaling},
        {"invariant suites", invariant_suites},
#ifdef TVSTARMA_HAVE_CLI
        {"CLI determinism", cli_determinism},
#else
        {"CLI determinism", [] { return Outcome{Status::Skip, "built without the CLI"}; }},
#endif
        {"precipitation MSE magnitude", precipitation_magnitude},
    };

    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {Status::Fail, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
        std::printf("[%s] %2d %s: %s [%.1f s]\n", tag, id, criteria[k].first.c_str(), o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += o.status == Status::Fail;
    }
    return failures == 0 ? 0 : 1;
}
