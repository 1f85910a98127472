#include "util/kv.hpp"

#include <fstream>
#include <sstream>

#include "util/csv.hpp"
#include "util/error.hpp"

namespace commotions {

static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

Config Config::parse_text(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(Error::Code::parse,
                 "config line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            fail(Error::Code::parse, "config line " + std::to_string(line_no) + ": empty key");
        cfg.set(key, value);
    }
    return cfg;
}

Config Config::parse_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) fail(Error::Code::io, "cannot open config file " + file);
    std::ostringstream text;
    text << in.rdbuf();
    return parse_text(text.str());
}

void Config::set(const std::string& key, const std::string& value) {
    values_[key] = value;
    effective_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) != 0; }

std::string Config::get_string(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    const std::string value = it == values_.end() ? def : it->second;
    effective_[key] = value;
    return value;
}

double Config::get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        effective_[key] = format_double(def);
        return def;
    }
    const double v = parse_double(it->second, "config key '" + key + "'");
    effective_[key] = it->second;
    return v;
}

int Config::get_int(const std::string& key, int def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        effective_[key] = std::to_string(def);
        return def;
    }
    const long v = parse_long(it->second, "config key '" + key + "'");
    effective_[key] = it->second;
    return static_cast<int>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        effective_[key] = std::to_string(def);
        return def;
    }
    std::uint64_t v = 0;
    try {
        v = std::stoull(it->second);
    } catch (const std::exception&) {
        fail(Error::Code::parse, "config key '" + key + "': not an unsigned integer: '" + it->second + "'");
    }
    effective_[key] = it->second;
    return v;
}

bool Config::get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        effective_[key] = def ? "true" : "false";
        return def;
    }
    effective_[key] = it->second;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    fail(Error::Code::parse, "config key '" + key + "': not a boolean: '" + it->second + "'");
}

std::string Config::require_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) fail(Error::Code::invalid_argument, "missing config key '" + key + "'");
    effective_[key] = it->second;
    return it->second;
}

std::string Config::to_text() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

}  // namespace commotions
