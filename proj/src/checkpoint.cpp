#include "arteeg/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "arteeg/errors.hpp"

namespace arteeg {

namespace {

constexpr char kMagic[4] = {'A', 'R', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

const std::array<std::uint32_t, 256>& crc_table() {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    return table;
}

// Buffer-building writer so the CRC covers exactly the emitted bytes.
struct Blob {
    std::vector<unsigned char> bytes;
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void u32(std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        raw(b, 4);
    }
    void u64(std::uint64_t v) {
        u32(static_cast<std::uint32_t>(v));
        u32(static_cast<std::uint32_t>(v >> 32));
    }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct Cursor {
    const unsigned char* p;
    const unsigned char* end;
    void need(std::size_t n, const char* what) {
        if (static_cast<std::size_t>(end - p) < n)
            throw CorruptCheckpoint(std::string("checkpoint truncated while reading ") + what);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
        p += 4;
        return v;
    }
    std::uint64_t u64(const char* what) {
        const std::uint64_t lo = u32(what);
        const std::uint64_t hi = u32(what);
        return lo | (hi << 32);
    }
    std::string str(const char* what) {
        const std::uint32_t n = u32(what);
        need(n, what);
        std::string s(reinterpret_cast<const char*>(p), n);
        p += n;
        return s;
    }
};

} // namespace

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t seed) {
    std::uint32_t c = seed ^ 0xFFFFFFFFu;
    const auto& t = crc_table();
    for (std::size_t i = 0; i < len; ++i) c = t[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void save_checkpoint(const std::string& path, const std::string& model_id,
                     const std::map<std::string, std::string>& config, std::uint64_t seed,
                     std::uint32_t epoch, const ParamStore& params) {
    Blob b;
    b.raw(kMagic, 4);
    b.u32(kVersion);
    b.str(model_id);
    std::ostringstream cfg;
    for (const auto& [k, v] : config) cfg << k << '=' << v << '\n';
    b.str(cfg.str());
    b.u64(seed);
    b.u32(epoch);
    b.u32(static_cast<std::uint32_t>(params.entries().size()));
    for (const auto& e : params.entries()) {
        b.str(e.name);
        const Shape& s = e.tensor.shape();
        b.u32(static_cast<std::uint32_t>(s.rank));
        for (int d = 0; d < s.rank; ++d) b.u32(static_cast<std::uint32_t>(s.d[d]));
        const Eigen::ArrayXd& v = e.tensor.values();
        for (long i = 0; i < v.size(); ++i) {
            const float f = static_cast<float>(v[i]);
            b.raw(&f, sizeof(float));
        }
    }
    const std::uint32_t crc = crc32(b.bytes.data(), b.bytes.size());
    b.u32(crc);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw UsageError("save_checkpoint: cannot open '" + path + "' for writing");
    os.write(reinterpret_cast<const char*>(b.bytes.data()),
             static_cast<std::streamsize>(b.bytes.size()));
    if (!os) throw UsageError("save_checkpoint: write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw UsageError("load_checkpoint: cannot open '" + path + "'");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 8) throw CorruptCheckpoint("checkpoint file too small");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CorruptCheckpoint("'" + path + "' is not a checkpoint file");
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored = static_cast<std::uint32_t>(bytes[body]) |
                                 (static_cast<std::uint32_t>(bytes[body + 1]) << 8) |
                                 (static_cast<std::uint32_t>(bytes[body + 2]) << 16) |
                                 (static_cast<std::uint32_t>(bytes[body + 3]) << 24);
    if (crc32(bytes.data(), body) != stored)
        throw CorruptCheckpoint("checkpoint CRC mismatch in '" + path + "'");

    Cursor c{bytes.data() + 4, bytes.data() + body};
    LoadedCheckpoint ck;
    const std::uint32_t version = c.u32("version");
    if (version != kVersion)
        throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
    ck.model_id = c.str("model id");
    const std::string cfg = c.str("config");
    std::istringstream cs(cfg);
    std::string line;
    while (std::getline(cs, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw CorruptCheckpoint("malformed config line '" + line + "'");
        ck.config[line.substr(0, eq)] = line.substr(eq + 1);
    }
    ck.seed = c.u64("seed");
    ck.epoch = c.u32("epoch");
    const std::uint32_t nrec = c.u32("record count");
    ck.records.reserve(nrec);
    for (std::uint32_t r = 0; r < nrec; ++r) {
        CheckpointRecord rec;
        rec.name = c.str("record name");
        const std::uint32_t rank = c.u32("record rank");
        if (rank > 3) throw CorruptCheckpoint("record '" + rec.name + "' has rank > 3");
        rec.shape.rank = static_cast<int>(rank);
        long n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            rec.shape.d[d] = static_cast<int>(c.u32("record dim"));
            n *= rec.shape.d[d];
        }
        rec.values.resize(n);
        for (long i = 0; i < n; ++i) {
            float f;
            c.need(sizeof(float), "record payload");
            std::memcpy(&f, c.p, sizeof(float));
            c.p += sizeof(float);
            rec.values[i] = static_cast<double>(f);
        }
        ck.records.push_back(std::move(rec));
    }
    if (c.p != c.end) throw CorruptCheckpoint("trailing bytes after last record");
    return ck;
}

void apply_checkpoint(ParamStore& params, const LoadedCheckpoint& ck) {
    if (ck.records.size() != params.entries().size())
        throw ShapeMismatch("checkpoint has " + std::to_string(ck.records.size()) +
                            " records, model expects " + std::to_string(params.entries().size()));
    for (std::size_t i = 0; i < ck.records.size(); ++i) {
        const auto& rec = ck.records[i];
        auto& e = params.entries()[i];
        if (rec.name != e.name)
            throw ShapeMismatch("checkpoint record '" + rec.name + "' where model expects '" +
                                e.name + "'");
        if (!(rec.shape == e.tensor.shape()))
            throw ShapeMismatch("checkpoint record '" + rec.name + "' has shape " +
                                rec.shape.str() + ", model expects " + e.tensor.shape().str());
        e.tensor.leaf_values() = rec.values;
    }
}

} // namespace arteeg
