#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arteeg/params.hpp"

namespace arteeg {

// "ARTC" container: magic, format version, model id string, config text blob,
// master seed, epoch counter, then one record per parameter (name, rank, dims,
// float32 payload) in store order, closed by a CRC-32 of all preceding bytes.
void save_checkpoint(const std::string& path, const std::string& model_id,
                     const std::map<std::string, std::string>& config, std::uint64_t seed,
                     std::uint32_t epoch, const ParamStore& params);

struct CheckpointRecord {
    std::string name;
    Shape shape;
    Eigen::ArrayXd values;
};

struct LoadedCheckpoint {
    std::string model_id;
    std::map<std::string, std::string> config;
    std::uint64_t seed = 0;
    std::uint32_t epoch = 0;
    std::vector<CheckpointRecord> records;
};

// Verifies magic, version, and trailing CRC; throws CorruptCheckpoint.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Copies record values into same-named store entries. Name or shape
// disagreement throws ShapeMismatch.
void apply_checkpoint(ParamStore& params, const LoadedCheckpoint& ck);

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed = 0);

} // namespace arteeg
