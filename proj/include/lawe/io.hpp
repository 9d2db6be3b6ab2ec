#ifndef LAWE_IO_HPP
#define LAWE_IO_HPP

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "lawe/error.hpp"

namespace lawe::io {

inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    auto [p, ec] = std::to_chars(buf, buf + 16, v, 16);
    std::string s(buf, p);
    return std::string(16 - s.size(), '0') + s;
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline double parse_double(std::string_view s)
{
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw validation_error("not a number: " + std::string(s));
    return v;
}

/// CSV table: a "# config_hash=..." comment line, a header row, then numeric rows.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string render(const std::string& config_hash) const
    {
        std::string out = "# config_hash=" + config_hash + "\n";
        for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                out += format_double(r[i]);
            }
            out += '\n';
        }
        return out;
    }
};

/// Parse a table written by Table::render; returns the hash through config_hash.
inline Table parse_table(const std::string& text, std::string* config_hash = nullptr)
{
    Table t;
    std::size_t pos = 0;
    auto next_line = [&](std::string& line) {
        if (pos >= text.size()) return false;
        const auto e = text.find('\n', pos);
        line = text.substr(pos, e == std::string::npos ? std::string::npos : e - pos);
        pos = e == std::string::npos ? text.size() : e + 1;
        return true;
    };
    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::size_t b = 0;
        for (;;) {
            const auto e = line.find(',', b);
            cells.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
            if (e == std::string::npos) break;
            b = e + 1;
        }
        return cells;
    };
    std::string line;
    if (!next_line(line) || line.rfind("# config_hash=", 0) != 0) throw validation_error("missing config hash line");
    if (config_hash) *config_hash = line.substr(14);
    if (!next_line(line)) throw validation_error("missing header row");
    t.header = split(line);
    while (next_line(line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const auto& c : split(line)) row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw validation_error("cannot read " + path.string());
    return std::string(std::istreambuf_iterator<char>(f), {});
}

}  // namespace lawe::io

#endif
