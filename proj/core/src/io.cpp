#include <algorithm>
#include "tvstarma/io.hpp"

#include "tvstarma/error.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <unordered_map>

namespace tvstarma {

namespace {

struct CsvRow {
    int line = 0;
    std::vector<std::string> fields;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<CsvRow> parse_csv(std::string_view text, std::string_view what) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    std::vector<CsvRow> rows;
    int line = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view raw = text.substr(pos, end - pos);
        pos = end + 1;
        ++line;
        if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
        if (trim(raw).empty()) continue;
        if (raw.find('"') != std::string_view::npos) {
            throw ValidationError(std::string(what) + " line " + std::to_string(line) + ": quoted fields are not supported");
        }
        CsvRow row;
        row.line = line;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = raw.find(',', start);
            row.fields.push_back(trim(raw.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                         : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(std::string(what) + ": empty file");
    return rows;
}

[[noreturn]] void fail_at(std::string_view what, int line, const std::string& msg) {
    throw ValidationError(std::string(what) + " line " + std::to_string(line) + ": " + msg);
}

void expect_header(const CsvRow& row, const std::vector<std::string>& expected, std::string_view what) {
    if (row.fields != expected) {
        std::string want;
        for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
        fail_at(what, row.line, "header must be '" + want + "'");
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(std::string_view text, std::string_view what) {
    const std::string s = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw ValidationError(std::string(what) + ": not a number: '" + s + "'");
    }
    return v;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open " + path.string());
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write " + path.string());
    os << text;
    if (!os) throw ValidationError("write failed: " + path.string());
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
        throw NumericalError("sha256: OpenSSL digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

StationGeometry parse_geometry_csv(std::string_view csv) {
    constexpr std::string_view what = "geometry csv";
    const auto rows = parse_csv(csv, what);
    expect_header(rows[0], {"id", "lat", "lon"}, what);
    std::vector<Station> stations;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != 3) fail_at(what, row.line, "expected 3 fields");
        try {
            stations.push_back({row.fields[0], {parse_double(row.fields[1], "lat"), parse_double(row.fields[2], "lon")}});
        } catch (const ValidationError& e) {
            fail_at(what, row.line, e.what());
        }
    }
    return StationGeometry(std::move(stations));
}

std::string render_geometry_csv(const StationGeometry& geom) {
    std::ostringstream os;
    os << "id,lat,lon\n";
    for (const auto& s : geom.stations()) {
        os << s.id << ',' << format_double(s.location.lat) << ',' << format_double(s.location.lon) << '\n';
    }
    return os.str();
}

StationGeometry read_geometry_csv(const std::filesystem::path& path) { return parse_geometry_csv(read_text_file(path)); }

PanelSeries parse_panel_csv(std::string_view csv) {
    constexpr std::string_view what = "panel csv";
    const auto rows = parse_csv(csv, what);
    const auto& header = rows[0].fields;
    if (header.size() < 2 || header[0] != "t") fail_at(what, rows[0].line, "header must be 't,<station ids>'");
    const std::vector<std::string> ids(header.begin() + 1, header.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (std::find(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i), ids[i]) != ids.begin() + static_cast<std::ptrdiff_t>(i))
            fail_at(what, rows[0].line, "duplicate station id '" + ids[i] + "'");
    }
    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size() - 1), n);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != ids.size() + 1) {
            fail_at(what, row.line, "expected " + std::to_string(ids.size() + 1) + " fields");
        }
        try {
            if (parse_double(row.fields[0], "t") != static_cast<double>(r)) {
                fail_at(what, row.line, "t must run 1, 2, ... without gaps");
            }
            for (Eigen::Index i = 0; i < n; ++i)
                values(static_cast<Eigen::Index>(r - 1), i) =
                    parse_double(row.fields[static_cast<std::size_t>(i) + 1], ids[static_cast<std::size_t>(i)]);
        } catch (const ValidationError& e) {
            if (std::string_view(e.what()).starts_with(what)) throw;
            fail_at(what, row.line, e.what());
        }
    }
    PanelSeries panel(std::move(values), ids);
    panel.validate();
    return panel;
}

std::string render_panel_csv(const PanelSeries& panel) {
    std::ostringstream os;
    os << 't';
    for (const auto& id : panel.station_ids) os << ',' << id;
    os << '\n';
    for (int t = 0; t < panel.T(); ++t) {
        os << t + 1;
        for (int i = 0; i < panel.n(); ++i) os << ',' << format_double(panel.values(t, i));
        os << '\n';
    }
    return os.str();
}

PanelSeries read_panel_csv(const std::filesystem::path& path) { return parse_panel_csv(read_text_file(path)); }

std::string render_weights_csv(const Eigen::MatrixXd& w, const std::vector<std::string>& ids) {
    if (w.rows() != static_cast<Eigen::Index>(ids.size()) || w.cols() != w.rows()) {
        throw ValidationError("weights csv: matrix does not match the station ids");
    }
    std::ostringstream os;
    os << "id";
    for (const auto& id : ids) os << ',' << id;
    os << '\n';
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        os << ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < w.cols(); ++j) os << ',' << format_double(w(i, j));
        os << '\n';
    }
    return os.str();
}

Eigen::MatrixXd parse_weights_csv(std::string_view csv, const std::vector<std::string>& ids) {
    constexpr std::string_view what = "weights csv";
    const auto rows = parse_csv(csv, what);
    std::vector<std::string> header{"id"};
    header.insert(header.end(), ids.begin(), ids.end());
    expect_header(rows[0], header, what);
    if (rows.size() != ids.size() + 1) throw ValidationError("weights csv: expected one row per station");
    const auto n = static_cast<Eigen::Index>(ids.size());
    Eigen::MatrixXd w(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i) + 1];
        if (row.fields.size() != ids.size() + 1 || row.fields[0] != ids[static_cast<std::size_t>(i)]) {
            fail_at(what, row.line, "row must start with station '" + ids[static_cast<std::size_t>(i)] + "'");
        }
        for (Eigen::Index j = 0; j < n; ++j) w(i, j) = parse_double(row.fields[static_cast<std::size_t>(j) + 1], "weight");
    }
    return w;
}

std::string render_row_sum_report(const Eigen::MatrixXd& w, const std::vector<std::string>& ids) {
    std::ostringstream os;
    os << "id,row_sum,diagonal,max_weight,max_neighbour\n";
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        Eigen::Index j = 0;
        const double mx = w.row(i).maxCoeff(&j);
        os << ids[static_cast<std::size_t>(i)] << ',' << format_double(w.row(i).sum()) << ',' << format_double(w(i, i))
           << ',' << format_double(mx) << ',' << ids[static_cast<std::size_t>(j)] << '\n';
    }
    return os.str();
}

std::string render_trace_csv(const std::vector<TraceRow>& trace) {
    std::ostringstream os;
    os << "t,coefficient_norm,trace_p,trace_sigma\n";
    for (const auto& r : trace) {
        os << r.t << ',' << format_double(r.coefficient_norm) << ',' << format_double(r.trace_p) << ','
           << format_double(r.trace_sigma) << '\n';
    }
    return os.str();
}

std::string render_dictionary_csv(const WaveletDictionary& dict) {
    std::ostringstream os;
    os << "t,psi_m1_0";
    for (int j = 0; j < dict.J(); ++j)
        for (int k = 0; k < (1 << j); ++k) os << ",psi_" << j << '_' << k;
    os << '\n';
    for (int t = 1; t <= dict.T(); ++t) {
        os << t;
        for (int c = 0; c < dict.size(); ++c) os << ',' << format_double(dict.values()(t - 1, c));
        os << '\n';
    }
    return os.str();
}

Date parse_date(std::string_view text) {
    const std::string s = trim(text);
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    auto digits = [&](std::size_t from, std::size_t len) {
        for (std::size_t i = from; i < from + len; ++i)
            if (s[i] < '0' || s[i] > '9') return false;
        return true;
    };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !digits(0, 4) || !digits(5, 2) || !digits(8, 2)) {
        throw ValidationError("invalid date '" + s + "' (expected YYYY-MM-DD)");
    }
    y = std::stoi(s.substr(0, 4));
    m = static_cast<unsigned>(std::stoi(s.substr(5, 2)));
    d = static_cast<unsigned>(std::stoi(s.substr(8, 2)));
    const Date date{std::chrono::year(y), std::chrono::month(m), std::chrono::day(d)};
    if (!date.ok()) throw ValidationError("invalid calendar date '" + s + "'");
    return date;
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

namespace {

bool is_missing(const std::string& v) { return v.empty() || v == "NA" || v == "-9999"; }

}  // namespace

IngestResult ingest_panel(std::string_view records_csv, const StationGeometry& geometry,
                          std::optional<DateWindow> window) {
    constexpr std::string_view what = "records csv";
    using std::chrono::sys_days;
    const auto rows = parse_csv(records_csv, what);
    expect_header(rows[0], {"station_id", "date", "value_tenths_mm"}, what);

    std::unordered_map<std::string, int> index;
    for (int i = 0; i < geometry.size(); ++i) index[geometry[i].id] = i;

    struct Parsed {
        int station;
        sys_days day;
        std::optional<double> value;
        int line;
    };
    std::vector<Parsed> parsed;
    parsed.reserve(rows.size());
    IngestReport report;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() != 3) fail_at(what, row.line, "expected 3 fields");
        Date date;
        std::optional<double> value;
        try {
            date = parse_date(row.fields[1]);
            if (!is_missing(row.fields[2])) value = parse_double(row.fields[2], "value_tenths_mm");
        } catch (const ValidationError& e) {
            fail_at(what, row.line, e.what());
        }
        if (value && !std::isfinite(*value)) fail_at(what, row.line, "non-finite value");
        const auto it = index.find(row.fields[0]);
        if (it == index.end()) {
            ++report.ignored_records;
            continue;
        }
        parsed.push_back({it->second, sys_days(date), value, row.line});
    }

    if (!window) {
        if (parsed.empty()) throw ValidationError("ingest: no records match the geometry stations");
        sys_days lo = parsed.front().day;
        sys_days hi = lo;
        for (const auto& p : parsed) {
            lo = std::min(lo, p.day);
            hi = std::max(hi, p.day);
        }
        window = DateWindow{Date(lo), Date(hi)};
    }
    const sys_days first(window->first);
    const sys_days last(window->last);
    if (last < first) throw ValidationError("ingest: date window ends before it starts");
    report.window = *window;
    const long long T = (last - first).count() + 1;
    if (T < 2) throw ValidationError("ingest: window must span at least two days");

    const int n = geometry.size();
    Eigen::MatrixXd values = Eigen::MatrixXd::Constant(T, n, std::numeric_limits<double>::quiet_NaN());
    std::vector<long long> records(static_cast<std::size_t>(n), 0);
    std::vector<long long> missing_values(static_cast<std::size_t>(n), 0);
    std::map<std::pair<int, long long>, int> first_line;
    for (const auto& p : parsed) {
        ++records[static_cast<std::size_t>(p.station)];
        if (p.day < first || p.day > last) {
            ++report.ignored_records;
            continue;
        }
        const long long t = (p.day - first).count();
        const auto [it, inserted] = first_line.emplace(std::make_pair(p.station, t), p.line);
        if (!inserted) {
            fail_at(what, p.line,
                    "duplicate record for " + geometry[p.station].id + " (first seen on line " +
                        std::to_string(it->second) + ")");
        }
        if (p.value) {
            values(t, p.station) = *p.value;
        } else {
            ++missing_values[static_cast<std::size_t>(p.station)];
        }
    }

    std::vector<int> keep;
    for (int i = 0; i < n; ++i) {
        const long long absent = values.col(i).array().isNaN().count();
        if (records[static_cast<std::size_t>(i)] == 0) {
            report.dropped.push_back({geometry[i].id, "no records"});
        } else if (absent > 0) {
            report.dropped.push_back({geometry[i].id, std::to_string(absent) + " of " + std::to_string(T) +
                                                          " days missing (" +
                                                          std::to_string(missing_values[static_cast<std::size_t>(i)]) +
                                                          " flagged missing)"});
        } else {
            keep.push_back(i);
            report.kept.push_back(geometry[i].id);
        }
    }
    if (keep.empty()) throw ValidationError("ingest: no station is complete in the window");
    if (keep.size() < 2) throw ValidationError("ingest: fewer than two complete stations in the window");

    Eigen::MatrixXd kept(T, static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) kept.col(static_cast<Eigen::Index>(c)) = values.col(keep[c]);
    const StationGeometry subset = geometry.subset(keep);
    return {PanelSeries(std::move(kept), subset.ids()), subset, std::move(report)};
}

IngestResult ingest_panel(const std::filesystem::path& records_path, const std::filesystem::path& geometry_path,
                          std::optional<DateWindow> window) {
    const StationGeometry geometry = read_geometry_csv(geometry_path);
    return ingest_panel(read_text_file(records_path), geometry, window);
}

PanelSeries log10_transform(const PanelSeries& panel) {
    Eigen::MatrixXd out(panel.T(), panel.n());
    for (int t = 0; t < panel.T(); ++t) {
        for (int i = 0; i < panel.n(); ++i) {
            const double y = panel.values(t, i);
            if (!(y >= 0.0)) {
                const std::string id = i < static_cast<int>(panel.station_ids.size()) ? panel.station_ids[i]
                                                                                       : std::to_string(i + 1);
                throw ValidationError("log10_transform: negative value " + format_double(y) + " at station " + id +
                                      ", t = " + std::to_string(t + 1));
            }
            out(t, i) = std::log10(y + 1.0);
        }
    }
    return PanelSeries(std::move(out), panel.station_ids);
}

}  // namespace tvstarma
