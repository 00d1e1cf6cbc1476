#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xdrmob/error.hpp"

namespace xdrmob::csv {

/// Splits one CSV record. Fields may be double-quoted; `""` escapes a quote.
std::vector<std::string> split(std::string_view line);

/// Line reader for small reference tables. Lines starting with '#' are
/// provenance comments and are skipped.
class TableReader {
public:
    explicit TableReader(const std::filesystem::path& path);

    /// Throws SchemaError unless the header matches exactly.
    void expect_header(std::string_view header);
    bool next(std::vector<std::string>& fields);
    std::size_t line_number() const noexcept { return line_no_; }
    const std::filesystem::path& path() const noexcept { return path_; }

    [[noreturn]] void fail(Errc code, const std::string& what) const;

private:
    bool next_line(std::string& line);

    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t line_no_ = 0;
};

template <class T>
std::optional<T> parse_number(std::string_view text)
{
    T value{};
    if (text.empty()) {
        return std::nullopt;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return value;
}

/// Shortest round-trip representation; deterministic across runs.
std::string format_double(double value);

std::string quote_if_needed(std::string_view field);

/// Opens a file for writing, creating parent directories. Throws IoError.
std::ofstream open_output(const std::filesystem::path& path);

}  // namespace xdrmob::csv
