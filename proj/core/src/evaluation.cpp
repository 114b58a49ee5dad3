#include "tvstarma/evaluation.hpp"

#include "tvstarma/error.hpp"
#include "tvstarma/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace tvstarma {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string short_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string file_safe(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
        out += keep ? c : '_';
    }
    return out;
}

std::string lag_name(Lag lag, bool ma) {
    return std::string(ma ? "theta" : "phi") + "_s" + std::to_string(lag.s) + "_l" + std::to_string(lag.l);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + path.string());
    os << text;
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string FitSpec::label() const { return table_label() + "_" + weights.label(); }

std::string FitSpec::table_label() const { return model.label() + "_" + to_string(method); }

FitMethod default_method(const ModelSpec& spec) { return spec.q == 0 ? FitMethod::LeastSquares : FitMethod::Kalman; }

FitResult fit_panel(const PanelSeries& Z, const WeightMatrixSet& W, const FitSpec& fit) {
    const auto dict = shared_dictionary(Z.T(), fit.model.J, fit.model.family);
    if (fit.method == FitMethod::LeastSquares) {
        return fit_ls(build_design(Z, W, fit.model, *dict), Z);
    }
    return fit_kalman(Z, W, fit.model, *dict, fit.kalman).result;
}

std::string to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::TvStar: return "tvstar";
        case GeneratorKind::TvStarma: return "tvstarma";
        case GeneratorKind::Grf: return "grf";
    }
    return "tvstar";
}

GeneratorKind parse_generator_kind(std::string_view name) {
    if (name == "tvstar") return GeneratorKind::TvStar;
    if (name == "tvstarma") return GeneratorKind::TvStarma;
    if (name == "grf") return GeneratorKind::Grf;
    throw ValidationError("unknown generator '" + std::string(name) + "' (expected tvstar, tvstarma, grf)");
}

int Generator::cell_count() const { return kind == GeneratorKind::Grf ? static_cast<int>(grf_grid.size()) : 1; }

std::string Generator::cell_label(int cell) const {
    if (kind != GeneratorKind::Grf) return to_string(preset);
    const auto& g = grf_grid.at(static_cast<std::size_t>(cell));
    return "gamma" + short_number(g.gamma) + "_delta" + short_number(g.delta);
}

CoefficientFunctions Generator::coefficients() const {
    switch (preset) {
        case CoefficientPreset::Group1: return preset_group1();
        case CoefficientPreset::Group2: return preset_group2();
        case CoefficientPreset::Custom: break;
    }
    throw ValidationError("study generators need a coefficient preset (group1 or group2)");
}

std::vector<GneitingCovarianceSpec> comparison_grf_grid() {
    std::vector<GneitingCovarianceSpec> grid;
    for (double gamma : {0.25, 0.5, 1.0}) {
        for (double delta : {0.5, 1.0, 1.5}) {
            GneitingCovarianceSpec s;
            s.gamma = gamma;
            s.delta = delta;
            grid.push_back(s);
        }
    }
    return grid;
}

void StudyDesign::validate() const {
    if (M < 1) throw ValidationError("study: M must be >= 1");
    if (fit_specs.empty()) throw ValidationError("study: no fit specs");
    if (T < 4) throw ValidationError("study: T must be >= 4");
    if (geometry) {
        if (geometry->size() != n) throw ValidationError("study: n does not match the geometry");
    } else if (n < 2) {
        throw ValidationError("study: n must be >= 2");
    }
    switch (generator.kind) {
        case GeneratorKind::TvStar:
            if (generator.coefficients().has_ma()) throw ValidationError("study: tvstar generator with an MA preset");
            break;
        case GeneratorKind::TvStarma: (void)generator.coefficients(); break;
        case GeneratorKind::Grf:
            if (generator.grf_grid.empty()) throw ValidationError("study: empty GRF grid");
            for (const auto& g : generator.grf_grid) g.validate();
            if (static_cast<long long>(n) * T > GrfSampler::kMaxCells) {
                throw ValidationError("study: n T exceeds the dense GRF limit");
            }
            break;
    }
    if (!(generator.sigma2 >= 0.0)) throw ValidationError("study: sigma2 must be >= 0");
    for (const auto& f : fit_specs) {
        f.model.validate(1);
        f.kalman.validate();
        if (!(f.weights.alpha > 0.0)) throw ValidationError("study: weight alpha must be positive");
        if ((1 << f.model.J) >= T) throw ValidationError("study: 2^J must be below T for " + f.label());
    }
}

StationGeometry StudyDesign::resolve_geometry() const {
    return geometry ? *geometry : random_geometry(n, box, geometry_seed);
}

const CellResult& StudyResult::cell(int generator_cell, int fit_index) const {
    const std::size_t idx =
        static_cast<std::size_t>(generator_cell) * fit_labels.size() + static_cast<std::size_t>(fit_index);
    return cells.at(idx);
}

double aggregate_mse(const std::vector<double>& values) {
    double sum = 0.0;
    int count = 0;
    for (double v : values) {
        if (std::isnan(v)) continue;
        sum += v;
        ++count;
    }
    return count == 0 ? kNaN : sum / count;
}

namespace {

struct FitOutcome {
    double mse = kNaN;
    std::string failure;
    Eigen::MatrixXd curves;  // T x (ar + ma lags)
};

std::vector<Lag> curve_lags(const ModelSpec& spec, std::vector<bool>& is_ma) {
    std::vector<Lag> lags = spec.ar_lags();
    is_ma.assign(lags.size(), false);
    for (const Lag& l : spec.ma_lags()) {
        lags.push_back(l);
        is_ma.push_back(true);
    }
    return lags;
}

}  // namespace

StudyResult run_study(const StudyDesign& design) {
    design.validate();
    StudyResult result;
    result.geometry = design.resolve_geometry();
    result.T = design.T;
    const int n = result.geometry.size();
    const int F = static_cast<int>(design.fit_specs.size());
    const int G = design.generator.cell_count();

    for (int g = 0; g < G; ++g) result.generator_labels.push_back(design.generator.cell_label(g));
    for (const auto& f : design.fit_specs) {
        result.fit_labels.push_back(f.label());
        result.fit_tables.push_back(f.table_label());
        result.fit_columns.push_back(f.weights.label());
    }
    for (int m = 0; m < design.M; ++m) result.replicate_seeds.push_back(derive_seed(design.base_seed, m));

    std::vector<WeightMatrixSet> fit_weights;
    for (const auto& f : design.fit_specs) fit_weights.push_back(WeightMatrixSet::from_geometry(result.geometry, f.weights));
    const WeightMatrixSet sim_weights =
        WeightMatrixSet::from_geometry(result.geometry, WeightScheme{WeightKind::InverseDistance, 0.5});
    for (const auto& f : design.fit_specs) (void)shared_dictionary(design.T, f.model.J, f.model.family);

    for (int g = 0; g < G; ++g) {
        std::optional<GrfSampler> sampler;
        std::optional<CoefficientFunctions> funcs;
        if (design.generator.kind == GeneratorKind::Grf) {
            sampler.emplace(result.geometry, design.T, design.generator.grf_grid[static_cast<std::size_t>(g)],
                            design.generator.grf_scale);
        } else {
            funcs = design.generator.coefficients();
        }

        std::vector<std::vector<FitOutcome>> outcomes(static_cast<std::size_t>(design.M),
                                                      std::vector<FitOutcome>(static_cast<std::size_t>(F)));
        parallel_for(design.M, [&](int m) {
            auto& row = outcomes[static_cast<std::size_t>(m)];
            const std::uint64_t seed = result.replicate_seeds[static_cast<std::size_t>(m)];
            PanelSeries panel;
            try {
                switch (design.generator.kind) {
                    case GeneratorKind::Grf: panel = sampler->draw(seed); break;
                    case GeneratorKind::TvStar:
                        panel = simulate_tvstar(*funcs, sim_weights, design.T, n, design.generator.sigma2, seed);
                        break;
                    case GeneratorKind::TvStarma:
                        panel = simulate_tvstarma(*funcs, sim_weights, design.T, n, design.generator.sigma2, seed);
                        break;
                }
            } catch (const NumericalError& e) {
                for (auto& o : row) o.failure = std::string("simulation: ") + e.what();
                return;
            }
            for (int f = 0; f < F; ++f) {
                auto& o = row[static_cast<std::size_t>(f)];
                try {
                    const FitResult fit = fit_panel(panel, fit_weights[static_cast<std::size_t>(f)],
                                                    design.fit_specs[static_cast<std::size_t>(f)]);
                    o.mse = fit.mse;
                    if (design.keep_curves) {
                        const std::size_t lags = fit.ar_curves.size() + fit.ma_curves.size();
                        o.curves.resize(design.T, static_cast<Eigen::Index>(lags));
                        Eigen::Index c = 0;
                        for (const auto& cv : fit.ar_curves) o.curves.col(c++) = cv.values;
                        for (const auto& cv : fit.ma_curves) o.curves.col(c++) = cv.values;
                    }
                } catch (const NumericalError& e) {
                    o.failure = e.what();
                }
            }
        });

        for (int f = 0; f < F; ++f) {
            CellResult cell;
            cell.generator_cell = g;
            cell.fit_index = f;
            for (int m = 0; m < design.M; ++m) {
                const auto& o = outcomes[static_cast<std::size_t>(m)][static_cast<std::size_t>(f)];
                cell.replicate_mse.push_back(o.failure.empty() ? o.mse : kNaN);
                if (o.failure.empty()) {
                    ++cell.included;
                } else {
                    ++cell.excluded;
                    cell.exclusion_reasons.push_back("replicate " + std::to_string(m) + ": " + o.failure);
                }
            }
            cell.mse = aggregate_mse(cell.replicate_mse);

            if (design.keep_curves && cell.included > 0) {
                std::vector<bool> is_ma;
                const auto lags = curve_lags(design.fit_specs[static_cast<std::size_t>(f)].model, is_ma);
                const auto L = static_cast<Eigen::Index>(lags.size());
                Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(design.T, L);
                Eigen::MatrixXd sumsq = Eigen::MatrixXd::Zero(design.T, L);
                for (int m = 0; m < design.M; ++m) {
                    const auto& o = outcomes[static_cast<std::size_t>(m)][static_cast<std::size_t>(f)];
                    if (!o.failure.empty()) continue;
                    sum += o.curves;
                    sumsq += o.curves.cwiseProduct(o.curves);
                }
                const double k = cell.included;
                const Eigen::MatrixXd mean = sum / k;
                Eigen::MatrixXd se = Eigen::MatrixXd::Zero(design.T, L);
                if (cell.included > 1) {
                    const Eigen::MatrixXd var = ((sumsq - k * mean.cwiseProduct(mean)) / (k - 1.0)).cwiseMax(0.0);
                    se = (var / k).cwiseSqrt();
                }
                for (Eigen::Index c = 0; c < L; ++c) {
                    cell.curves.push_back({lags[static_cast<std::size_t>(c)], is_ma[static_cast<std::size_t>(c)],
                                           mean.col(c), se.col(c)});
                }
            }
            result.cells.push_back(std::move(cell));
        }
    }
    return result;
}

std::vector<RecoveryError> curve_recovery_error(const std::vector<CurveSummary>& curves,
                                                const CoefficientFunctions& truth, int T) {
    const int lo = static_cast<int>(std::ceil(0.1 * T));
    const int hi = static_cast<int>(std::floor(0.9 * T));
    std::vector<RecoveryError> out;
    for (const auto& c : curves) {
        if (c.mean.size() != T) throw ValidationError("curve_recovery_error: curve length differs from T");
        const Eigen::VectorXd target = c.moving_average ? truth.fitted_ma_truth(c.lag, T) : truth.ar_curve(c.lag, T);
        const Eigen::VectorXd diff = c.mean - target;
        RecoveryError e;
        e.lag = c.lag;
        e.moving_average = c.moving_average;
        e.untrimmed = std::sqrt(diff.squaredNorm() / T);
        e.trimmed = std::sqrt(diff.segment(lo - 1, hi - lo + 1).squaredNorm() / (hi - lo + 1));
        out.push_back(e);
    }
    return out;
}

std::vector<RecoveryError> curve_recovery_error(const StudyResult& result, int generator_cell, int fit_index,
                                                const CoefficientFunctions& truth) {
    return curve_recovery_error(result.cell(generator_cell, fit_index).curves, truth, result.T);
}

std::vector<MseTable> mse_tables(const StudyResult& result) {
    std::vector<MseTable> tables;
    std::vector<std::vector<int>> members;
    for (int f = 0; f < static_cast<int>(result.fit_labels.size()); ++f) {
        const std::string& title = result.fit_tables[static_cast<std::size_t>(f)];
        const std::string& column = result.fit_columns[static_cast<std::size_t>(f)];
        std::size_t t = 0;
        while (t < tables.size() && tables[t].title != title) ++t;
        if (t == tables.size()) {
            tables.push_back({title, result.generator_labels, {}, {}, {}});
            members.emplace_back();
        }
        tables[t].column_labels.push_back(column);
        members[t].push_back(f);
    }
    for (std::size_t t = 0; t < tables.size(); ++t) {
        auto& table = tables[t];
        const auto rows = static_cast<Eigen::Index>(table.row_labels.size());
        const auto cols = static_cast<Eigen::Index>(members[t].size());
        table.values.resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            Eigen::Index best = -1;
            for (Eigen::Index c = 0; c < cols; ++c) {
                const double v = result.cell(static_cast<int>(r), members[t][static_cast<std::size_t>(c)]).mse;
                table.values(r, c) = v;
                if (!std::isnan(v) && (best < 0 || v < table.values(r, best))) best = c;
            }
            table.min_labels.push_back(best < 0 ? "" : table.column_labels[static_cast<std::size_t>(best)]);
        }
    }
    return tables;
}

std::string render_csv(const MseTable& table) {
    std::ostringstream os;
    os << "cell";
    for (const auto& c : table.column_labels) os << ',' << c;
    os << ",min\n";
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        os << table.row_labels[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) os << ',' << format_number(table.values(r, c));
        os << ',' << table.min_labels[static_cast<std::size_t>(r)] << '\n';
    }
    return os.str();
}

std::string render_text(const MseTable& table) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"cell"};
    header.insert(header.end(), table.column_labels.begin(), table.column_labels.end());
    header.push_back("min");
    grid.push_back(header);
    for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
        std::vector<std::string> row{table.row_labels[static_cast<std::size_t>(r)]};
        for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.6e", table.values(r, c));
            row.emplace_back(buf);
        }
        row.push_back(table.min_labels[static_cast<std::size_t>(r)]);
        grid.push_back(row);
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : grid)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::ostringstream os;
    os << table.title << '\n';
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c > 0) os << "  ";
            os << (c == 0 ? std::left : std::right) << std::setw(static_cast<int>(width[c])) << row[c];
        }
        os << '\n';
    }
    return os.str();
}

MseTable parse_table_csv(std::string_view csv, std::string title) {
    MseTable table;
    table.title = std::move(title);
    std::istringstream is{std::string(csv)};
    std::string line;
    int lineno = 0;
    std::size_t columns = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (lineno == 1) {
            if (fields.size() < 3 || fields.front() != "cell" || fields.back() != "min") {
                throw ValidationError("table csv: header must be cell,<columns>,min");
            }
            table.column_labels.assign(fields.begin() + 1, fields.end() - 1);
            columns = table.column_labels.size();
            continue;
        }
        if (fields.size() != columns + 2) {
            throw ValidationError("table csv line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(columns + 2) + " fields");
        }
        table.row_labels.push_back(fields.front());
        std::vector<double> values;
        for (std::size_t c = 1; c <= columns; ++c) {
            char* end = nullptr;
            const double v = std::strtod(fields[c].c_str(), &end);
            if (end == fields[c].c_str() || *end != '\0') {
                throw ValidationError("table csv line " + std::to_string(lineno) + ": bad number '" + fields[c] + "'");
            }
            values.push_back(v);
        }
        rows.push_back(std::move(values));
        table.min_labels.push_back(fields.back());
    }
    if (columns == 0) throw ValidationError("table csv: missing header");
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < columns; ++c)
            table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return table;
}

std::vector<std::pair<std::string, std::string>> render_study_files(const StudyResult& result,
                                                                    const StudyDesign& design) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& table : mse_tables(result)) {
        files.emplace_back("tables/" + file_safe(table.title) + ".csv", render_csv(table));
        files.emplace_back("tables/" + file_safe(table.title) + ".txt", render_text(table));
    }

    std::ostringstream cells;
    cells << "cell,fit,mse,included,excluded\n";
    for (const auto& c : result.cells) {
        cells << result.generator_labels[static_cast<std::size_t>(c.generator_cell)] << ','
              << result.fit_labels[static_cast<std::size_t>(c.fit_index)] << ',' << format_number(c.mse) << ','
              << c.included << ',' << c.excluded << '\n';
    }
    files.emplace_back("tables/cells.csv", cells.str());

    if (design.generator.kind == GeneratorKind::Grf) return files;
    const CoefficientFunctions truth = design.generator.coefficients();
    for (const auto& c : result.cells) {
        for (const auto& curve : c.curves) {
            const Eigen::VectorXd target =
                curve.moving_average ? truth.fitted_ma_truth(curve.lag, result.T) : truth.ar_curve(curve.lag, result.T);
            std::ostringstream os;
            os << "t,truth,mean_estimate,mc_stderr\n";
            for (int t = 1; t <= result.T; ++t) {
                os << t << ',' << format_number(target[t - 1]) << ',' << format_number(curve.mean[t - 1]) << ','
                   << format_number(curve.stderr_[t - 1]) << '\n';
            }
            const std::string name = result.generator_labels[static_cast<std::size_t>(c.generator_cell)] + "__" +
                                     result.fit_labels[static_cast<std::size_t>(c.fit_index)] + "__" +
                                     lag_name(curve.lag, curve.moving_average);
            files.emplace_back("curves/" + file_safe(name) + ".csv", os.str());
        }
    }
    return files;
}

void emit_tables(const StudyResult& result, const StudyDesign& design, const std::filesystem::path& out_dir) {
    for (const auto& [name, text] : render_study_files(result, design)) {
        const auto path = out_dir / name;
        std::filesystem::create_directories(path.parent_path());
        write_file(path, text);
    }
}

}  // namespace tvstarma
