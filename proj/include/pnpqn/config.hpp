#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pnpqn/errors.hpp"

namespace pnpqn {

// Flat key=value configuration, UTF-8. Lines are `key = value`; blank lines
// and lines starting with # are ignored. Insertion order is preserved so
// parse(serialize(cfg)) == cfg.
class Config {
public:
    Config() = default;

    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    std::string serialize() const;
    void save_file(const std::string& path) const;

    void set(const std::string& key, const std::string& value);
    void set_double(const std::string& key, double value);
    bool has(const std::string& key) const;

    // Required lookups throw ParameterError when the key is missing.
    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    uint64_t get_u64(const std::string& key, uint64_t fallback) const;

    const std::vector<std::pair<std::string, std::string>>& entries() const {
        return entries_;
    }
    bool operator==(const Config& other) const { return entries_ == other.entries_; }

    // Keys present in the file but never looked up; surfaced as warnings so
    // typos in config files do not silently change nothing.
    std::vector<std::string> unqueried_keys() const;

private:
    std::optional<std::string> find(const std::string& key) const;

    std::vector<std::pair<std::string, std::string>> entries_;
    mutable std::vector<std::string> queried_;
};

} // namespace pnpqn
