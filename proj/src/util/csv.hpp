#pragma once
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace commotions {

// Minimal comma-separated text, no quoting: fields must not contain commas or
// newlines. Doubles are written with std::to_chars (shortest round trip), so
// save/load is bit exact and locale independent.

std::string format_double(double v);
double parse_double(const std::string& field, const std::string& context);
std::optional<double> parse_optional_double(const std::string& field, const std::string& context);
long parse_long(const std::string& field, const std::string& context);

struct CsvTable {
    std::filesystem::path source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // throws Error::parse if absent
};

CsvTable read_csv(const std::filesystem::path& file);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header);
    ~CsvWriter();
    void row(const std::vector<std::string>& fields);
    void close();  // writes the file; throws Error::io on failure

private:
    std::string buffer_;
    std::filesystem::path file_;
    std::size_t width_;
    bool closed_ = false;
};

}  // namespace commotions
