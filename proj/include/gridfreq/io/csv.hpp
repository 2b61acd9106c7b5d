#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "gridfreq/dataset.hpp"
#include "gridfreq/features.hpp"

namespace gridfreq::io {

/// Parses `YYYY-MM-DDThh:mm:ssZ` (UTC) to unix seconds; strict.
std::int64_t parse_timestamp(const std::string& text);
std::string format_timestamp(std::int64_t ts);

/// Doubles are written with the shortest representation that parses back
/// to the same bits, so table round-trips are bit-exact.
std::string format_double(double v);
double parse_double(const std::string& text);

/// Feature table CSV: header row, column 1 `timestamp` ISO-8601 UTC, the
/// remaining columns numeric with empty cells for missing values. Column
/// metadata travels in the JSON feature manifest, not the CSV.
void write_feature_csv(const features::FeatureTable& table,
                       const std::filesystem::path& path);
features::FeatureTable read_feature_csv(const std::filesystem::path& path);

/// Feature manifest: name, kind, availability, country per column.
void write_feature_manifest(const features::FeatureTable& table,
                            const std::filesystem::path& path);
void apply_feature_manifest(features::FeatureTable& table,
                            const std::filesystem::path& path);

/// Frequency CSV: `timestamp,frequency_hz` at 1 Hz, contiguous. Converted
/// to omega = 2*pi*(f - f_ref) on read.
FrequencyRecord read_frequency_csv(const std::filesystem::path& path,
                                   double f_ref = 50.0);
void write_frequency_csv(const FrequencyRecord& record,
                         const std::filesystem::path& path, double f_ref = 50.0);

}  // namespace gridfreq::io
