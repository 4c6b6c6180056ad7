#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gdfmgan {

/// Flat `key = value` settings. Lines starting with '#' are comments; lists
/// are comma separated. Later assignments override earlier ones.
class Config {
public:
    static Config parse(const std::string& text, const std::string& origin = "<string>");
    static Config load(const std::string& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }

    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::int64_t> get_ints(const std::string& key, const std::vector<std::int64_t>& fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    /// Sorted `key=value` lines; stable input for hashing.
    std::string canonical() const;

private:
    std::map<std::string, std::string> entries_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

}  // namespace gdfmgan
