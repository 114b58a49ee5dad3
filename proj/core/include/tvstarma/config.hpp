#pragma once

#include "tvstarma/evaluation.hpp"
#include "tvstarma/io.hpp"
#include "tvstarma/kalman.hpp"
#include "tvstarma/model.hpp"
#include "tvstarma/simulation.hpp"
#include "tvstarma/spatial.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tvstarma {

inline constexpr int kConfigSchemaVersion = 1;

/// Per-command run configurations. Parsing rejects unknown keys and validates every field.
struct SimulateConfig {
    GeneratorKind generator = GeneratorKind::TvStar;
    CoefficientPreset preset = CoefficientPreset::Group1;
    double sigma2 = 1.0;
    GneitingCovarianceSpec grf;
    DistanceScale grf_scale = DistanceScale::ArcDegrees;
    int T = 1024;
    int n = 15;
    std::string geometry;  // path; empty draws random_geometry
    BoundingBox box;
    std::uint64_t geometry_seed = 1;
    std::uint64_t seed = 1;
};

struct FitConfig {
    std::string panel;
    std::string geometry;
    std::string weights_file;  // optional explicit W^(1) csv, overrides `weights`
    ModelSpec model;
    std::optional<FitMethod> method;  // absent: LS for q = 0, Kalman otherwise
    WeightScheme weights;
    KalmanConfig kalman;
    bool log10 = false;
    std::uint64_t seed = 0;  // recorded only; fitting is deterministic

    void validate() const;
    FitSpec fit_spec() const;
};

struct StudyConfig {
    StudyDesign design;
    std::string geometry;  // path; empty draws random_geometry
    bool full_scale = false;
};

struct WeightsConfig {
    std::string geometry;
    WeightScheme weights;
    std::uint64_t seed = 0;
};

struct IngestConfig {
    std::string records;
    std::string geometry;
    std::optional<DateWindow> window;
    bool log10 = true;
    std::uint64_t seed = 0;
};

SimulateConfig parse_simulate_config(std::string_view json);
FitConfig parse_fit_config(std::string_view json);
StudyConfig parse_study_config(std::string_view json);
WeightsConfig parse_weights_config(std::string_view json);
IngestConfig parse_ingest_config(std::string_view json);

/// Fully resolved configs, every field explicit, pretty-printed with sorted keys.
std::string render_config(const SimulateConfig& cfg);
std::string render_config(const FitConfig& cfg);
std::string render_config(const StudyConfig& cfg);
std::string render_config(const WeightsConfig& cfg);
std::string render_config(const IngestConfig& cfg);

/// Desk-scale default study: the weight-matrix comparison (GRF generator) or a curve-recovery study.
StudyConfig default_study_config(GeneratorKind generator);
/// M = 1000 (process generators) or 500 (GRF) with T = 1024.
void apply_full_scale(StudyConfig& cfg);

/// The five weight schemes of the comparison tables: inverse distance 0.5, 1; negative exponential 0.5, 1, 2.
std::vector<WeightScheme> comparison_weight_schemes();

CoefficientPreset parse_preset(std::string_view name);
FitMethod parse_fit_method(std::string_view name);

}  // namespace tvstarma
