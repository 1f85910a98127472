#pragma once
#include <cstdint>
#include <map>
#include <string>

namespace commotions {

// Flat key=value configuration. Lines are "key = value", '#' starts a
// comment. Lookups record the value actually used (explicit or default) so a
// run can echo its complete effective configuration into the output files.
class Config {
public:
    Config() = default;

    static Config parse_text(const std::string& text);
    static Config parse_file(const std::string& file);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t def) const;
    bool get_bool(const std::string& key, bool def) const;

    std::string require_string(const std::string& key) const;

    // keys given explicitly
    const std::map<std::string, std::string>& values() const { return values_; }
    // explicit keys plus every default that was consulted
    const std::map<std::string, std::string>& effective() const { return effective_; }

    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> effective_;
};

}  // namespace commotions
