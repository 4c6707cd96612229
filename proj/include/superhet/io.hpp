#ifndef SUPERHET_IO_HPP
#define SUPERHET_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "superhet/errors.hpp"

namespace superhet::io {

/// Shortest round-trip decimal representation.
inline std::string format_number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_optional(const std::optional<double>& v)
{
    return v ? format_number(*v) : std::string{};
}

inline std::optional<double> parse_number(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    if (!s.empty() && s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
        return std::nullopt;
    }
    return v;
}

/// Builds one CSV document in memory: header row, then data rows.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : m_columns(header.size())
    {
        append_row(header);
    }

    CsvTable& row(const std::vector<std::string>& cells)
    {
        if (cells.size() != m_columns) {
            throw IoError("CsvTable: row has " + std::to_string(cells.size()) + " cells, expected "
                          + std::to_string(m_columns));
        }
        append_row(cells);
        return *this;
    }

    const std::string& str() const noexcept { return m_text; }

private:
    void append_row(const std::vector<std::string>& cells)
    {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) {
                m_text += ',';
            }
            m_text += cells[i];
        }
        m_text += '\n';
    }

    std::size_t m_columns;
    std::string m_text;
};

/// 64-bit FNV-1a, used as the content hash in manifests.
inline std::uint64_t fnv1a64(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    const auto res = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, res.ptr);
    return std::string(16 - s.size(), '0') + s;
}

inline void write_file(const std::filesystem::path& path, std::string_view content)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": "
                          + ec.message());
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace superhet::io

#endif
