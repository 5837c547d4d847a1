#include "arteeg/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "arteeg/errors.hpp"

namespace arteeg {

void Manifest::set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find('=') != std::string::npos ||
        key.find('\n') != std::string::npos)
        throw UsageError("manifest: bad key '" + key + "'");
    if (value.find('\n') != std::string::npos)
        throw UsageError("manifest: value for '" + key + "' spans lines");
    items_[key] = value;
}

void Manifest::set(const std::string& key, long long value) {
    set(key, std::to_string(value));
}

void Manifest::set(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    set(key, os.str());
}

bool Manifest::has(const std::string& key) const { return items_.count(key) != 0; }

const std::string& Manifest::get(const std::string& key) const {
    auto it = items_.find(key);
    if (it == items_.end()) throw UsageError("manifest: missing key '" + key + "'");
    return it->second;
}

void Manifest::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw UsageError("cannot write " + tmp);
        for (const auto& [k, v] : items_) out << k << '=' << v << '\n';
        if (!out) throw UsageError("write failed on " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw UsageError("cannot move " + tmp + " into place");
}

Manifest Manifest::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read manifest " + path);
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos || eq == 0)
            throw UsageError("manifest: malformed line '" + line + "' in " + path);
        m.items_[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
}

} // namespace arteeg
