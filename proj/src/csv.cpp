#include "xdrmob/csv.hpp"

#include <cmath>

namespace xdrmob::csv {

std::vector<std::string> split(std::string_view line)
{
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

TableReader::TableReader(const std::filesystem::path& path) : path_(path), in_(path)
{
    if (!in_) {
        throw Error(Errc::IoError, "cannot open " + path.string());
    }
}

bool TableReader::next_line(std::string& line)
{
    while (std::getline(in_, line)) {
        ++line_no_;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty() && line.front() == '#') {
            continue;
        }
        return true;
    }
    return false;
}

void TableReader::expect_header(std::string_view header)
{
    std::string line;
    if (!next_line(line)) {
        fail(Errc::SchemaError, "empty file, expected header '" + std::string(header) + "'");
    }
    if (line != header) {
        fail(Errc::SchemaError, "header mismatch: expected '" + std::string(header) + "', got '" + line + "'");
    }
}

bool TableReader::next(std::vector<std::string>& fields)
{
    std::string line;
    while (next_line(line)) {
        if (line.empty()) {
            continue;
        }
        fields = split(line);
        return true;
    }
    return false;
}

void TableReader::fail(Errc code, const std::string& what) const
{
    throw Error(code, path_.string() + ":" + std::to_string(line_no_) + ": " + what);
}

std::string format_double(double value)
{
    if (std::isnan(value)) {
        return "nan";
    }
    if (value == 0.0) {
        return "0";  // folds -0
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string quote_if_needed(std::string_view field)
{
    if (field.find_first_of(",\"\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::ofstream open_output(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::IoError, "cannot write " + path.string());
    }
    return out;
}

}  // namespace xdrmob::csv
