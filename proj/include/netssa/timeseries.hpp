#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

#include "netssa/csv.hpp"
#include "netssa/errors.hpp"

namespace netssa {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline const std::vector<std::string>& flow_feature_names() {
    static const std::vector<std::string> names = {"packets", "src_ips", "dst_ips", "src_ports",
                                                   "dst_ports"};
    return names;
}

// Column indices of the aggregate_bins feature layout.
namespace feature {
inline constexpr Index packets = 0;
inline constexpr Index src_ips = 1;
inline constexpr Index dst_ips = 2;
inline constexpr Index src_ports = 3;
inline constexpr Index dst_ports = 4;
}  // namespace feature

struct FlowSeries {
    Matrix values;  // bins x features
    std::int64_t bin_seconds = 300;
    std::vector<std::string> feature_names;
    std::int64_t start_time = 0;

    Index bins() const { return values.rows(); }
    Index features() const { return values.cols(); }
    std::int64_t bin_start(Index i) const { return start_time + i * bin_seconds; }
};

inline void validate(const FlowSeries& s) {
    if (s.bins() < 2) throw ParameterError("series needs at least 2 bins");
    if (s.features() < 1) throw ParameterError("series needs at least 1 feature");
    if (s.bin_seconds <= 0) throw ParameterError("bin_seconds must be positive");
    if (static_cast<Index>(s.feature_names.size()) != s.features())
        throw ShapeError("feature_names size does not match the number of columns");
    if (!s.values.allFinite()) throw ParameterError("series contains non-finite values");
}

inline std::vector<std::string> default_feature_names(Index m) {
    std::vector<std::string> names;
    for (Index q = 0; q < m; ++q) names.push_back("f" + std::to_string(q + 1));
    return names;
}

inline FlowSeries make_series(Matrix values, std::int64_t bin_seconds = 300,
                              std::vector<std::string> names = {}, std::int64_t start_time = 0) {
    FlowSeries s;
    if (names.empty()) names = default_feature_names(values.cols());
    s.values = std::move(values);
    s.bin_seconds = bin_seconds;
    s.feature_names = std::move(names);
    s.start_time = start_time;
    validate(s);
    return s;
}

struct FlowRecord {
    std::int64_t timestamp = 0;
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    int protocol = 0;
    std::uint64_t packets = 0;
};

inline constexpr const char* kFlowRecordHeader =
    "timestamp,src_ip,dst_ip,src_port,dst_port,protocol,packets";

inline std::vector<FlowRecord> ingest_flow_records(std::istream& is) {
    std::vector<FlowRecord> out;
    std::string line;
    std::size_t no = 0;
    while (std::getline(is, line)) {
        ++no;
        if (csv::is_skippable(line)) continue;
        if (csv::trim(line) == kFlowRecordHeader) continue;
        const auto f = csv::split(line);
        if (f.size() != 7)
            throw ParseError(csv::where(no) + ": expected 7 fields, got " + std::to_string(f.size()));
        FlowRecord r;
        r.timestamp = csv::parse_int<std::int64_t>(f[0], no, "timestamp");
        r.src_ip = std::string(f[1]);
        r.dst_ip = std::string(f[2]);
        if (r.src_ip.empty() || r.dst_ip.empty())
            throw ParseError(csv::where(no) + ": empty address");
        r.src_port = csv::parse_int<int>(f[3], no, "src_port");
        r.dst_port = csv::parse_int<int>(f[4], no, "dst_port");
        if (r.src_port < 0 || r.src_port > 65535 || r.dst_port < 0 || r.dst_port > 65535)
            throw ParseError(csv::where(no) + ": port out of range 0-65535");
        r.protocol = csv::parse_int<int>(f[5], no, "protocol");
        if (r.protocol < 0 || r.protocol > 255)
            throw ParseError(csv::where(no) + ": protocol out of range 0-255");
        r.packets = csv::parse_int<std::uint64_t>(f[6], no, "packets");
        out.push_back(std::move(r));
    }
    return out;
}

// Bins start at the earliest timestamp. A trace covering one bin gets a zero bin appended.
inline FlowSeries aggregate_bins(const std::vector<FlowRecord>& records, std::int64_t bin_seconds) {
    if (records.empty()) throw ParameterError("aggregate_bins needs at least one record");
    if (bin_seconds <= 0) throw ParameterError("bin_seconds must be positive");
    const auto [lo, hi] = std::minmax_element(
        records.begin(), records.end(),
        [](const FlowRecord& a, const FlowRecord& b) { return a.timestamp < b.timestamp; });
    const std::int64_t start = lo->timestamp;
    const Index n = static_cast<Index>((hi->timestamp - start) / bin_seconds) + 1;

    std::vector<std::unordered_set<std::string>> src(n), dst(n);
    std::vector<std::unordered_set<int>> sport(n), dport(n);
    Matrix v = Matrix::Zero(std::max<Index>(n, 2), 5);
    for (const auto& r : records) {
        const Index b = static_cast<Index>((r.timestamp - start) / bin_seconds);
        v(b, feature::packets) += static_cast<double>(r.packets);
        src[b].insert(r.src_ip);
        dst[b].insert(r.dst_ip);
        sport[b].insert(r.src_port);
        dport[b].insert(r.dst_port);
    }
    for (Index b = 0; b < n; ++b) {
        v(b, feature::src_ips) = static_cast<double>(src[b].size());
        v(b, feature::dst_ips) = static_cast<double>(dst[b].size());
        v(b, feature::src_ports) = static_cast<double>(sport[b].size());
        v(b, feature::dst_ports) = static_cast<double>(dport[b].size());
    }
    return make_series(std::move(v), bin_seconds, flow_feature_names(), start);
}

struct CenteredSeries {
    FlowSeries series;
    Vector means;
    Vector scales;  // all ones unless standardized
};

inline CenteredSeries center(const FlowSeries& s, bool standardize = false) {
    validate(s);
    CenteredSeries out{s, s.values.colwise().mean().transpose(), Vector::Ones(s.features())};
    out.series.values.rowwise() -= out.means.transpose();
    if (standardize) {
        for (Index q = 0; q < s.features(); ++q) {
            const double sd = std::sqrt(out.series.values.col(q).squaredNorm() /
                                        static_cast<double>(s.bins() - 1));
            if (sd > 0) {
                out.scales(q) = sd;
                out.series.values.col(q) /= sd;
            }
        }
    }
    return out;
}

inline FlowSeries decenter(const FlowSeries& s, const Vector& means, const Vector& scales) {
    if (means.size() != s.features() || scales.size() != s.features())
        throw ShapeError("decenter: means/scales length mismatch");
    FlowSeries out = s;
    out.values = (s.values.array().rowwise() * scales.transpose().array()).matrix();
    out.values.rowwise() += means.transpose();
    return out;
}

inline void write_series_csv(std::ostream& os, const FlowSeries& s) {
    csv::write_schema_line(os, "series");
    os << "bin_start";
    for (const auto& name : s.feature_names) os << ',' << name;
    os << '\n';
    for (Index i = 0; i < s.bins(); ++i) {
        os << s.bin_start(i);
        for (Index q = 0; q < s.features(); ++q) os << ',' << csv::format_double(s.values(i, q));
        os << '\n';
    }
}

inline FlowSeries read_series_csv(std::istream& is) {
    const auto t = csv::read_table(is);
    if (t.header.empty() || t.header[0] != "bin_start")
        throw ParseError("series file: header must start with bin_start");
    const Index m = static_cast<Index>(t.header.size()) - 1;
    const Index n = static_cast<Index>(t.rows.size());
    if (m < 1) throw ParseError("series file: no feature columns");
    if (n < 2) throw ParseError("series file: fewer than 2 bins");
    Matrix v(n, m);
    std::vector<std::int64_t> starts(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = t.rows[i];
        const auto no = t.line_numbers[i];
        starts[i] = csv::parse_int<std::int64_t>(row[0], no, "bin_start");
        for (Index q = 0; q < m; ++q) v(i, q) = csv::parse_double(row[q + 1], no, t.header[q + 1]);
    }
    const std::int64_t step = starts[1] - starts[0];
    if (step <= 0) throw ParseError("series file: bin_start must increase");
    for (Index i = 1; i < n; ++i)
        if (starts[i] - starts[i - 1] != step)
            throw ParseError(csv::where(t.line_numbers[i]) + ": bins are not uniformly spaced");
    if (!v.allFinite()) throw ParseError("series file: non-finite value");
    return make_series(std::move(v), step,
                       std::vector<std::string>(t.header.begin() + 1, t.header.end()), starts[0]);
}

}  // namespace netssa
