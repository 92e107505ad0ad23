#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "netssa/errors.hpp"

namespace netssa::csv {

// Every file netssa writes starts with this comment line; readers skip '#' lines.
inline constexpr int kSchemaVersion = 1;

inline void write_schema_line(std::ostream& os, std::string_view kind) {
    os << "# netssa-schema " << kSchemaVersion << ' ' << kind << '\n';
}

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = line.find(sep, pos);
        out.push_back(trim(line.substr(pos, next == std::string_view::npos ? next : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

inline bool is_skippable(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

inline std::string where(std::size_t line_no) { return "line " + std::to_string(line_no); }

template <class Int>
Int parse_int(std::string_view field, std::size_t line_no, std::string_view name) {
    Int v{};
    const auto* end = field.data() + field.size();
    auto [p, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || p != end || field.empty())
        throw ParseError(where(line_no) + ": bad integer for " + std::string(name) + ": '" +
                         std::string(field) + "'");
    return v;
}

inline double parse_double(std::string_view field, std::size_t line_no, std::string_view name) {
    if (field == "inf" || field == "+inf") return std::numeric_limits<double>::infinity();
    double v{};
    const auto* end = field.data() + field.size();
    auto [p, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || p != end || field.empty())
        throw ParseError(where(line_no) + ": bad number for " + std::string(name) + ": '" +
                         std::string(field) + "'");
    return v;
}

// Shortest representation that round-trips.
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// Reads non-comment lines; the first one is returned as the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

inline Table read_table(std::istream& is) {
    Table t;
    std::string line;
    std::size_t no = 0;
    bool have_header = false;
    while (std::getline(is, line)) {
        ++no;
        if (is_skippable(line)) continue;
        auto fields = split(line);
        std::vector<std::string> owned(fields.begin(), fields.end());
        if (!have_header) {
            t.header = std::move(owned);
            have_header = true;
            continue;
        }
        if (owned.size() != t.header.size())
            throw ParseError(where(no) + ": expected " + std::to_string(t.header.size()) +
                             " fields, got " + std::to_string(owned.size()));
        t.rows.push_back(std::move(owned));
        t.line_numbers.push_back(no);
    }
    return t;
}

}  // namespace netssa::csv
