#pragma once

#include "tvstarma/kalman.hpp"
#include "tvstarma/ls.hpp"
#include "tvstarma/model.hpp"
#include "tvstarma/simulation.hpp"
#include "tvstarma/spatial.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tvstarma {

/// One fitted configuration: model orders, estimator and weight scheme.
struct FitSpec {
    ModelSpec model;
    FitMethod method = FitMethod::LeastSquares;
    WeightScheme weights;
    KalmanConfig kalman;

    /// e.g. `tvSTAR(1_1)_J2_ls_di_a1`.
    std::string label() const;
    /// Model and method part of the label; fits sharing it form one table.
    std::string table_label() const;
};

/// LS for q = 0, Kalman otherwise.
FitMethod default_method(const ModelSpec& spec);

/// Fits `Z` with the estimator of `fit`, using the cached dictionary for (T, J).
FitResult fit_panel(const PanelSeries& Z, const WeightMatrixSet& W, const FitSpec& fit);

enum class GeneratorKind { TvStar, TvStarma, Grf };

std::string to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view name);

/**
 * Data-generating side of a study. TvStar/TvStarma use `coefficients` with
 * inverse-distance alpha = 0.5 weights; Grf has one generator cell per entry
 * of `grf_grid`.
 */
struct Generator {
    GeneratorKind kind = GeneratorKind::TvStar;
    CoefficientPreset preset = CoefficientPreset::Group1;
    double sigma2 = 1.0;
    std::vector<GneitingCovarianceSpec> grf_grid;
    DistanceScale grf_scale = DistanceScale::ArcDegrees;

    int cell_count() const;
    std::string cell_label(int cell) const;
    CoefficientFunctions coefficients() const;
};

/// The 3 x 3 gamma x delta grid of the weight-matrix comparison (zeta = 1, nugget 0.05, sigma2 = 1).
std::vector<GneitingCovarianceSpec> comparison_grf_grid();

struct StudyDesign {
    Generator generator;
    std::vector<FitSpec> fit_specs;
    int M = 50;
    int T = 1024;
    int n = 15;
    std::uint64_t base_seed = 1;
    /// Geometry shared by all replicates; random_geometry(n, box, geometry_seed) when absent.
    std::optional<StationGeometry> geometry;
    BoundingBox box;
    std::uint64_t geometry_seed = 1;
    /// Keep replicate-averaged curves (disabled for large grids to save memory).
    bool keep_curves = true;

    void validate() const;
    StationGeometry resolve_geometry() const;
};

struct CurveSummary {
    Lag lag;
    bool moving_average = false;
    Eigen::VectorXd mean;
    Eigen::VectorXd stderr_;  // pointwise Monte Carlo standard error of the mean
};

struct CellResult {
    int generator_cell = 0;
    int fit_index = 0;
    /// Mean over included replicates of the per-replicate MSE.
    double mse = 0.0;
    int included = 0;
    int excluded = 0;
    /// Per replicate, NaN where excluded.
    std::vector<double> replicate_mse;
    std::vector<std::string> exclusion_reasons;
    std::vector<CurveSummary> curves;
};

struct StudyResult {
    std::vector<std::string> generator_labels;
    std::vector<std::string> fit_labels;
    std::vector<std::string> fit_tables;   // FitSpec::table_label per fit
    std::vector<std::string> fit_columns;  // weight scheme label per fit
    std::vector<CellResult> cells;  // generator-major
    std::vector<std::uint64_t> replicate_seeds;
    StationGeometry geometry;
    int T = 0;

    const CellResult& cell(int generator_cell, int fit_index) const;
};

/**
 * Monte Carlo study. Replicate m uses seed derive_seed(base_seed, m) for every
 * generator cell, so all fits of a replicate see one shared panel and GRF cells
 * share their standard normal draws. Fits failing with NumericalError are
 * excluded from their cell and counted.
 */
StudyResult run_study(const StudyDesign& design);

/// Sum of `values` in index order divided by their count, NaN entries skipped.
double aggregate_mse(const std::vector<double>& values);

struct RecoveryError {
    Lag lag;
    bool moving_average = false;
    double trimmed = 0.0;    // t in [0.1 T, 0.9 T]
    double untrimmed = 0.0;  // t in 1..T
};

/// Root-mean-square gap between a cell's averaged curves and `truth`; MA curves compare against -theta.
std::vector<RecoveryError> curve_recovery_error(const StudyResult& result, int generator_cell, int fit_index,
                                                const CoefficientFunctions& truth);
std::vector<RecoveryError> curve_recovery_error(const std::vector<CurveSummary>& curves,
                                                const CoefficientFunctions& truth, int T);

/// Rows: generator cells; columns: weight schemes of fits sharing a table_label; `min` names the row minimizer.
struct MseTable {
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<std::string> column_labels;
    Eigen::MatrixXd values;
    std::vector<std::string> min_labels;

    friend bool operator==(const MseTable&, const MseTable&) = default;
};

std::vector<MseTable> mse_tables(const StudyResult& result);
std::string render_csv(const MseTable& table);
std::string render_text(const MseTable& table);
MseTable parse_table_csv(std::string_view csv, std::string title = {});

/// (relative path, contents) of tables/<title>.csv|.txt, tables/cells.csv and, for generators with a
/// known truth, curves/<cell>__<fit>__<phi|theta>_s<s>_l<l>.csv.
std::vector<std::pair<std::string, std::string>> render_study_files(const StudyResult& result,
                                                                    const StudyDesign& design);

/// Writes render_study_files below `out_dir`.
void emit_tables(const StudyResult& result, const StudyDesign& design, const std::filesystem::path& out_dir);

}  // namespace tvstarma
