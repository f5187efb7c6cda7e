#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ppnet/train.hpp"

namespace ppnet {

// Flat JSON schema: every key below is required, anything else is rejected.
// See configs/desk.json for the reference instance.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::filesystem::path& file);

// Canonical (key-sorted) serialization; also what goes into manifests.
std::string train_config_to_json(const TrainConfig& cfg);

struct RunManifest {
    std::string command;
    std::string resolved_config;  // canonical JSON text, "" when command takes none
    uint64_t seed = 0;
    std::vector<std::string> artifacts;
    std::string tool_version = "0.1.0";

    void write(const std::filesystem::path& file) const;
};

}  // namespace ppnet
