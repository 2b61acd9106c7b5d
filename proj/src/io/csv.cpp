#include "gridfreq/io/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "gridfreq/errors.hpp"

namespace gridfreq::io {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t next = line.find(',', pos);
        if (next == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, next - pos));
        pos = next + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

}  // namespace

std::int64_t parse_timestamp(const std::string& text) {
    int year, month, day, hour, minute, second;
    char z = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &year, &month, &day,
                    &hour, &minute, &second, &z) != 7 ||
        z != 'Z') {
        throw IrregularTimestamps("timestamp not in YYYY-MM-DDThh:mm:ssZ form: " + text);
    }
    std::tm tm{};
    tm.tm_year = year - 1900;
    tm.tm_mon = month - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = minute;
    tm.tm_sec = second;
    const time_t ts = timegm(&tm);
    if (ts == static_cast<time_t>(-1)) {
        throw IrregularTimestamps("timestamp out of range: " + text);
    }
    return static_cast<std::int64_t>(ts);
}

std::string format_timestamp(std::int64_t ts) {
    const auto t = static_cast<time_t>(ts);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw DataError("malformed numeric cell: '" + text + "'");
    }
    return v;
}

void write_feature_csv(const features::FeatureTable& table,
                       const std::filesystem::path& path) {
    std::ofstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    file << "timestamp";
    for (const features::ColumnMeta& c : table.columns) {
        file << ',' << c.name;
    }
    file << '\n';
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        file << format_timestamp(table.timestamps[i]);
        for (std::size_t c = 0; c < table.n_cols(); ++c) {
            file << ',';
            const double v = table.data[c][i];
            if (!std::isnan(v)) {
                file << format_double(v);
            }
        }
        file << '\n';
    }
}

features::FeatureTable read_feature_csv(const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(file, line)) {
        throw DataError("empty feature CSV: " + path.string());
    }
    const std::vector<std::string> header = split_line(line);
    if (header.empty() || header[0] != "timestamp") {
        throw DataError("feature CSV must start with a 'timestamp' column");
    }
    features::FeatureTable table;
    for (std::size_t c = 1; c < header.size(); ++c) {
        table.columns.push_back(features::ColumnMeta{
            header[c], features::Kind::kOther, features::Availability::kActual, ""});
        table.data.emplace_back();
    }
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != header.size()) {
            throw DataError("ragged feature CSV row in " + path.string());
        }
        table.timestamps.push_back(parse_timestamp(cells[0]));
        for (std::size_t c = 1; c < cells.size(); ++c) {
            table.data[c - 1].push_back(
                cells[c].empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : parse_double(cells[c]));
        }
    }
    return table;
}

void write_feature_manifest(const features::FeatureTable& table,
                            const std::filesystem::path& path) {
    nlohmann::json cols = nlohmann::json::array();
    for (const features::ColumnMeta& c : table.columns) {
        cols.push_back({{"name", c.name},
                        {"kind", features::kind_name(c.kind)},
                        {"availability", features::availability_name(c.availability)},
                        {"country", c.country}});
    }
    nlohmann::json doc{{"format_version", 1}, {"columns", cols}};
    std::ofstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    file << doc.dump(2) << '\n';
}

void apply_feature_manifest(features::FeatureTable& table,
                            const std::filesystem::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string());
    }
    nlohmann::json doc;
    file >> doc;
    for (const nlohmann::json& col : doc.at("columns")) {
        const std::string name = col.at("name").get<std::string>();
        const auto idx = table.find(name);
        if (!idx) continue;
        features::ColumnMeta& meta = table.columns[*idx];
        meta.kind = features::kind_from_name(col.at("kind").get<std::string>());
        meta.availability =
            features::availability_from_name(col.at("availability").get<std::string>());
        meta.country = col.value("country", "");
    }
}

FrequencyRecord read_frequency_csv(const std::filesystem::path& path, double f_ref) {
    std::ifstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(file, line)) {
        throw DataError("empty frequency CSV: " + path.string());
    }
    const std::vector<std::string> header = split_line(line);
    if (header.size() != 2 || header[0] != "timestamp" || header[1] != "frequency_hz") {
        throw DataError("frequency CSV must have columns timestamp,frequency_hz");
    }
    constexpr double kTwoPi = 6.28318530717958647693;
    FrequencyRecord record;
    std::int64_t expected = 0;
    bool first = true;
    while (std::getline(file, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split_line(line);
        if (cells.size() != 2) {
            throw DataError("ragged frequency CSV row in " + path.string());
        }
        const std::int64_t ts = parse_timestamp(cells[0]);
        if (first) {
            record.start_ts = ts;
            expected = ts;
            first = false;
        }
        if (ts != expected) {
            throw IrregularTimestamps("frequency record must be contiguous at 1 Hz");
        }
        ++expected;
        record.omega.push_back(kTwoPi * (parse_double(cells[1]) - f_ref));
    }
    if (record.omega.empty()) {
        throw DataError("frequency CSV has no samples: " + path.string());
    }
    return record;
}

void write_frequency_csv(const FrequencyRecord& record,
                         const std::filesystem::path& path, double f_ref) {
    std::ofstream file(path);
    if (!file) {
        throw DataError("cannot open " + path.string() + " for writing");
    }
    constexpr double kTwoPi = 6.28318530717958647693;
    file << "timestamp,frequency_hz\n";
    for (std::size_t k = 0; k < record.omega.size(); ++k) {
        file << format_timestamp(record.start_ts + static_cast<std::int64_t>(k)) << ','
             << format_double(f_ref + record.omega[k] / kTwoPi) << '\n';
    }
}

}  // namespace gridfreq::io
