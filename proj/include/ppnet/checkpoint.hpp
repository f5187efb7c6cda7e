#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ppnet/tensor.hpp"

namespace ppnet {

// Versioned parameter container. Layout (all little-endian):
//   magic "PPNC" | u32 version | u64 config fingerprint | u64 step
//   | u64 record count | records
// record: u32 name length | name bytes | u32 rank | u64 dims... | f32 payload.
// Optimizer moments are stored as ordinary records named "opt.<param>.m"/".v".
struct Checkpoint {
    static constexpr uint32_t kVersion = 1;

    uint64_t fingerprint = 0;
    uint64_t step = 0;
    std::vector<std::pair<std::string, TensorF>> tensors;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    const TensorF* find(const std::string& name) const;
};

// FNV-1a over the canonical config serialization.
uint64_t fnv1a64(const std::string& s);

}  // namespace ppnet
