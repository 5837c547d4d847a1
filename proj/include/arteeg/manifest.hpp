#pragma once

#include <map>
#include <string>

namespace arteeg {

// Flat key=value run record, one entry per line, keys sorted. Values must be
// single-line. Saving goes through a temp file and rename so readers never
// observe a half-written manifest.
class Manifest {
public:
    void set(const std::string& key, const std::string& value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, double value);

    bool has(const std::string& key) const;
    const std::string& get(const std::string& key) const;
    const std::map<std::string, std::string>& items() const { return items_; }

    void save(const std::string& path) const;
    static Manifest load(const std::string& path);

private:
    std::map<std::string, std::string> items_;
};

} // namespace arteeg
