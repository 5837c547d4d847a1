#pragma once

#include <string>
#include <vector>

#include "arteeg/tensor.hpp"

namespace arteeg {

// Segment container file: "EEGT" magic, format version, channel count, samples
// per segment, segment count (all u32 little-endian), then float32 samples laid
// out segment-major, channel-major within a segment.
void write_eegt(const std::string& path, const std::vector<RowMat>& segments);

struct EegtData {
    int channels = 0;
    int samples = 0;
    std::vector<RowMat> segments;
};

EegtData read_eegt(const std::string& path);

struct TagRow {
    int index = 0;
    std::string tag;
    std::string split;  // train | val | test
};

// Sidecar CSV with header "index,tag,split".
void write_tags(const std::string& path, const std::vector<TagRow>& rows);
std::vector<TagRow> read_tags(const std::string& path);

} // namespace arteeg
