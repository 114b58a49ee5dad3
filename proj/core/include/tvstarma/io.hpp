#pragma once

#include "tvstarma/kalman.hpp"
#include "tvstarma/model.hpp"
#include "tvstarma/spatial.hpp"
#include "tvstarma/wavelet.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tvstarma {

/// Decimal text with 17 significant digits.
std::string format_double(double v);
/// Strict decimal parse; `what` names the field in the error.
double parse_double(std::string_view text, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// `id,lat,lon`, one station per row; row order is the station index.
StationGeometry parse_geometry_csv(std::string_view csv);
std::string render_geometry_csv(const StationGeometry& geom);
StationGeometry read_geometry_csv(const std::filesystem::path& path);

/// `t,<id_1>,...,<id_n>` with t = 1..T in order.
PanelSeries parse_panel_csv(std::string_view csv);
std::string render_panel_csv(const PanelSeries& panel);
PanelSeries read_panel_csv(const std::filesystem::path& path);

/// `id,<id_1>,...,<id_n>`, row i holding w_i.
std::string render_weights_csv(const Eigen::MatrixXd& w, const std::vector<std::string>& ids);
Eigen::MatrixXd parse_weights_csv(std::string_view csv, const std::vector<std::string>& ids);
/// `id,row_sum,diagonal,max_weight,max_neighbour`.
std::string render_row_sum_report(const Eigen::MatrixXd& w, const std::vector<std::string>& ids);

std::string render_trace_csv(const std::vector<TraceRow>& trace);
/// `t,psi_m1_0,psi_0_0,psi_1_0,...` for debugging the dictionary.
std::string render_dictionary_csv(const WaveletDictionary& dict);

using Date = std::chrono::year_month_day;

/// YYYY-MM-DD, validated against the calendar.
Date parse_date(std::string_view text);
std::string format_date(Date d);

struct DateWindow {
    Date first;
    Date last;  // inclusive
};

struct DroppedStation {
    std::string id;
    std::string reason;
};

struct IngestReport {
    DateWindow window;
    std::vector<std::string> kept;
    std::vector<DroppedStation> dropped;
    long long ignored_records = 0;  // records of stations absent from the geometry or outside the window
};

struct IngestResult {
    PanelSeries panel;
    StationGeometry geometry;
    IngestReport report;
};

/**
 * Builds a daily T x n panel from long records `station_id,date,value_tenths_mm`.
 *
 * Every calendar day of the (inclusive) window must be present for a station
 * to be kept; an absent day, an empty value, `NA` or `-9999` counts as
 * missing. Geometry stations without any record are dropped as well. Without
 * a window the span of all record dates is used.
 */
IngestResult ingest_panel(std::string_view records_csv, const StationGeometry& geometry,
                          std::optional<DateWindow> window = std::nullopt);
IngestResult ingest_panel(const std::filesystem::path& records_path, const std::filesystem::path& geometry_path,
                          std::optional<DateWindow> window = std::nullopt);

/// log10(y + 1) elementwise; a negative cell is reported by station id and time.
PanelSeries log10_transform(const PanelSeries& panel);

}  // namespace tvstarma
