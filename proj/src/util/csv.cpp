#include "util/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "util/error.hpp"

namespace commotions {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) fail(Error::Code::internal, "double formatting failed");
    return std::string(buf, ptr);
}

double parse_double(const std::string& field, const std::string& context) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        fail(Error::Code::parse, context + ": not a number: '" + field + "'");
    return value;
}

std::optional<double> parse_optional_double(const std::string& field, const std::string& context) {
    if (field.empty()) return std::nullopt;
    return parse_double(field, context);
}

long parse_long(const std::string& field, const std::string& context) {
    long value = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end)
        fail(Error::Code::parse, context + ": not an integer: '" + field + "'");
    return value;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    fail(Error::Code::parse, source.string() + ": missing column '" + name + "'");
}

static std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

CsvTable read_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) fail(Error::Code::io, "cannot open " + file.string());
    CsvTable table;
    table.source = file;
    std::string line;
    if (!std::getline(in, line)) fail(Error::Code::parse, file.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    table.header = split_line(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_line(line);
        if (fields.size() != table.header.size())
            fail(Error::Code::parse, file.string() + ":" + std::to_string(line_no) +
                                         ": expected " + std::to_string(table.header.size()) +
                                         " fields, got " + std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
    }
    return table;
}

CsvWriter::CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header)
    : file_(file), width_(header.size()) {
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != width_)
        fail(Error::Code::internal, file_.string() + ": row width mismatch");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& f = fields[i];
        if (f.find_first_of(",\n\r") != std::string::npos)
            fail(Error::Code::internal, file_.string() + ": field contains a separator: " + f);
        if (i) buffer_ += ',';
        buffer_ += f;
    }
    buffer_ += '\n';
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    std::ofstream out(file_, std::ios::binary | std::ios::trunc);
    out << buffer_;
    out.flush();
    if (!out) fail(Error::Code::io, "cannot write " + file_.string());
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
        // destructor swallows the failure; call close() to observe it
    }
}

}  // namespace commotions
