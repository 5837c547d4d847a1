#include "arteeg/eegt_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "arteeg/errors.hpp"

namespace arteeg {

namespace {

constexpr char kMagic[4] = {'E', 'E', 'G', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4))
        throw UsageError(std::string("truncated EEGT file while reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

} // namespace

void write_eegt(const std::string& path, const std::vector<RowMat>& segments) {
    if (segments.empty()) throw UsageError("write_eegt: no segments");
    const int c = static_cast<int>(segments[0].rows());
    const int t = static_cast<int>(segments[0].cols());
    for (const auto& s : segments)
        if (s.rows() != c || s.cols() != t)
            throw ShapeMismatch("write_eegt: segments have differing shapes");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw UsageError("write_eegt: cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<std::uint32_t>(c));
    put_u32(os, static_cast<std::uint32_t>(t));
    put_u32(os, static_cast<std::uint32_t>(segments.size()));
    std::vector<float> row(static_cast<std::size_t>(t));
    for (const auto& s : segments)
        for (int ch = 0; ch < c; ++ch) {
            for (int j = 0; j < t; ++j) row[static_cast<std::size_t>(j)] = static_cast<float>(s(ch, j));
            os.write(reinterpret_cast<const char*>(row.data()),
                     static_cast<std::streamsize>(sizeof(float) * row.size()));
        }
    if (!os) throw UsageError("write_eegt: write failed for '" + path + "'");
}

EegtData read_eegt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("read_eegt: cannot open '" + path + "'");
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw UsageError("read_eegt: '" + path + "' is not an EEGT file");
    const std::uint32_t version = get_u32(is, "version");
    if (version != kVersion)
        throw UsageError("read_eegt: unsupported EEGT version " + std::to_string(version));
    EegtData d;
    d.channels = static_cast<int>(get_u32(is, "channel count"));
    d.samples = static_cast<int>(get_u32(is, "sample count"));
    const std::uint32_t nseg = get_u32(is, "segment count");
    if (d.channels <= 0 || d.samples <= 0)
        throw UsageError("read_eegt: degenerate dimensions in '" + path + "'");
    d.segments.reserve(nseg);
    std::vector<float> row(static_cast<std::size_t>(d.samples));
    for (std::uint32_t s = 0; s < nseg; ++s) {
        RowMat m(d.channels, d.samples);
        for (int ch = 0; ch < d.channels; ++ch) {
            if (!is.read(reinterpret_cast<char*>(row.data()),
                         static_cast<std::streamsize>(sizeof(float) * row.size())))
                throw UsageError("read_eegt: truncated sample data in '" + path + "'");
            for (int j = 0; j < d.samples; ++j) m(ch, j) = static_cast<double>(row[static_cast<std::size_t>(j)]);
        }
        d.segments.push_back(std::move(m));
    }
    return d;
}

void write_tags(const std::string& path, const std::vector<TagRow>& rows) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw UsageError("write_tags: cannot open '" + path + "' for writing");
    os << "index,tag,split\n";
    for (const auto& r : rows) os << r.index << ',' << r.tag << ',' << r.split << '\n';
    if (!os) throw UsageError("write_tags: write failed for '" + path + "'");
}

std::vector<TagRow> read_tags(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw UsageError("read_tags: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line) || line != "index,tag,split")
        throw UsageError("read_tags: '" + path + "' missing 'index,tag,split' header");
    std::vector<TagRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        TagRow r;
        std::string idx;
        if (!std::getline(ls, idx, ',') || !std::getline(ls, r.tag, ',') ||
            !std::getline(ls, r.split))
            throw UsageError("read_tags: malformed row '" + line + "'");
        try {
            r.index = std::stoi(idx);
        } catch (const std::exception&) {
            throw UsageError("read_tags: bad index '" + idx + "'");
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace arteeg
