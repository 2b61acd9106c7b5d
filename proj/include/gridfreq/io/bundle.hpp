#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridfreq/train.hpp"

namespace gridfreq::io {

/// Model bundle directory layout (format_version 1):
///   weights.json     network config + per-layer weight/bias arrays
///   normalizer.json  per-feature mean/std, kept indices, dropped names
///   config.json      training config, constraint spec, feature names
///   history.json     per-epoch train/validation NLL
/// JSON numbers use the shortest round-trip representation, so a
/// save/load cycle reproduces every double bit-exactly.
void save_model(const std::filesystem::path& dir, const train::TrainedModel& model,
                const std::vector<train::EpochStats>& history);
train::TrainedModel load_model(const std::filesystem::path& dir);

nlohmann::json train_config_to_json(const train::TrainConfig& cfg);
train::TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json constraint_spec_to_json(const nn::ConstraintSpec& spec);
nn::ConstraintSpec constraint_spec_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit digest of a file's bytes, as fixed-width hex.
std::string file_digest(const std::filesystem::path& path);

/// Run manifest: command, resolved configuration and its hash, seed, input
/// digests and produced outputs. Contains no wall-clock data, so reruns
/// are byte-identical.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;   ///< path -> digest
    std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

}  // namespace gridfreq::io
