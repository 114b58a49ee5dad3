#pragma once

#include "tvstarma/evaluation.hpp"
#include "tvstarma/io.hpp"
#include "tvstarma/model.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace tvstarma {

inline constexpr const char* kVersion = "0.1.0";

struct Provenance {
    std::string command;
    std::string config_sha256;
    std::vector<std::pair<std::string, std::string>> inputs;  // (path, sha256)
    std::uint64_t seed = 0;
};

/// FitResult document: spec echo, beta_hat, curves, sigma2_hat, mse, warnings and provenance.
std::string render_fit_json(const FitResult& fit, const FitSpec& spec, int T, int n,
                            const std::vector<std::string>& station_ids, const Provenance& provenance);

/// Seeds, per-cell inclusion counts and exclusion reasons of a study; no timing, so reruns compare equal.
std::string render_study_meta(const StudyResult& result, const StudyDesign& design, const Provenance& provenance);

/// Summary of an ingest run: window, kept and dropped stations.
std::string render_ingest_report(const IngestReport& report, const Provenance& provenance);

/// Small JSON object of string keys to numbers, for timing side files.
std::string render_timing(const std::vector<std::pair<std::string, double>>& entries);

}  // namespace tvstarma
