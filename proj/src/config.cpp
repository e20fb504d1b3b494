#include "pnpqn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pnpqn {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_string(buf.str());
    } catch (const IoError& e) {
        throw IoError("config '" + path + "': " + e.what());
    }
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw IoError("config: line " + std::to_string(lineno) +
                          " has no '=': " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw IoError("config: line " + std::to_string(lineno) + " has empty key");
        cfg.set(key, value);
    }
    return cfg;
}

std::string Config::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

void Config::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("config: cannot write '" + path + "'");
    out << serialize();
    if (!out) throw IoError("config: write to '" + path + "' failed");
}

void Config::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void Config::set_double(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    set(key, buf);
}

bool Config::has(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> Config::find(const std::string& key) const {
    if (std::find(queried_.begin(), queried_.end(), key) == queried_.end())
        queried_.push_back(key);
    for (const auto& [k, v] : entries_)
        if (k == key) return v;
    return std::nullopt;
}

std::string Config::get_str(const std::string& key) const {
    auto v = find(key);
    if (!v) throw ParameterError("config: missing required key '" + key + "'");
    return *v;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    return find(key).value_or(fallback);
}

double Config::get_double(const std::string& key) const {
    const std::string s = get_str(key);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParameterError("config: key '" + key + "' is not a number: '" + s + "'");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
    const std::string s = get_str(key);
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<int>(v);
    } catch (const std::exception&) {
        throw ParameterError("config: key '" + key + "' is not an integer: '" + s + "'");
    }
}

int Config::get_int(const std::string& key, int fallback) const {
    return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ParameterError("config: key '" + key + "' is not a boolean: '" + s + "'");
}

uint64_t Config::get_u64(const std::string& key, uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string s = get_str(key);
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<uint64_t>(v);
    } catch (const std::exception&) {
        throw ParameterError("config: key '" + key + "' is not an unsigned integer: '" +
                             s + "'");
    }
}

std::vector<std::string> Config::unqueried_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (std::find(queried_.begin(), queried_.end(), k) == queried_.end())
            out.push_back(k);
    return out;
}

} // namespace pnpqn
