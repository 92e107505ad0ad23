#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "netssa/csv.hpp"
#include "netssa/timeseries.hpp"

namespace netssa {

struct DetectionResult {
    Vector scores;
    double threshold = 0.0;
    std::vector<bool> alarms;
    std::string detector_name;
    // Bins after an event that can still carry its signature (ell - 1 for windowed scores).
    Index support_bins = 0;
    std::int64_t start_time = 0;
    std::int64_t bin_seconds = 300;

    Index bins() const { return scores.size(); }
};

inline void apply_threshold(DetectionResult& r, double threshold) {
    r.threshold = threshold;
    r.alarms.assign(static_cast<std::size_t>(r.scores.size()), false);
    for (Index t = 0; t < r.scores.size(); ++t) r.alarms[t] = r.scores(t) > threshold;
}

inline DetectionResult make_result(const FlowSeries& s, Vector scores, double threshold,
                                   std::string name, Index support = 0) {
    DetectionResult r;
    r.scores = std::move(scores);
    r.detector_name = std::move(name);
    r.support_bins = support;
    r.start_time = s.start_time;
    r.bin_seconds = s.bin_seconds;
    apply_threshold(r, threshold);
    return r;
}

inline Index alarm_count(const DetectionResult& r) {
    Index c = 0;
    for (bool a : r.alarms) c += a ? 1 : 0;
    return c;
}

inline void write_result_csv(std::ostream& os, const DetectionResult& r) {
    os << "# netssa-schema " << csv::kSchemaVersion << " detection detector=" << r.detector_name
       << " support=" << r.support_bins << '\n';
    os << "bin_start,score,threshold,alarm\n";
    for (Index t = 0; t < r.bins(); ++t)
        os << r.start_time + t * r.bin_seconds << ',' << csv::format_double(r.scores(t)) << ','
           << csv::format_double(r.threshold) << ',' << (r.alarms[t] ? 1 : 0) << '\n';
}

inline DetectionResult read_result_csv(std::istream& is) {
    DetectionResult r;
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.rfind("# netssa-schema", 0) != 0) continue;
            std::istringstream words(line);
            std::string w;
            while (words >> w) {
                const auto eq = w.find('=');
                if (eq == std::string::npos) continue;
                const auto key = w.substr(0, eq);
                const auto val = w.substr(eq + 1);
                if (key == "detector") r.detector_name = val;
                if (key == "support") r.support_bins = csv::parse_int<Index>(val, 1, "support");
            }
            break;
        }
    }
    std::istringstream body(text);
    const auto t = csv::read_table(body);
    if (t.header != std::vector<std::string>{"bin_start", "score", "threshold", "alarm"})
        throw ParseError("detection file: header must be bin_start,score,threshold,alarm");
    const Index n = static_cast<Index>(t.rows.size());
    r.scores.resize(n);
    r.alarms.resize(static_cast<std::size_t>(n));
    std::vector<std::int64_t> starts(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = t.rows[i];
        const auto no = t.line_numbers[i];
        starts[i] = csv::parse_int<std::int64_t>(row[0], no, "bin_start");
        r.scores(i) = csv::parse_double(row[1], no, "score");
        const double thr = csv::parse_double(row[2], no, "threshold");
        if (i == 0) r.threshold = thr;
        const int a = csv::parse_int<int>(row[3], no, "alarm");
        if (a != 0 && a != 1) throw ParseError(csv::where(no) + ": alarm must be 0 or 1");
        r.alarms[i] = a == 1;
    }
    if (n > 0) r.start_time = starts[0];
    if (n > 1) {
        r.bin_seconds = starts[1] - starts[0];
        if (r.bin_seconds <= 0) throw ParseError("detection file: bin_start must increase");
        for (Index i = 1; i < n; ++i)
            if (starts[i] - starts[i - 1] != r.bin_seconds)
                throw ParseError(csv::where(t.line_numbers[i]) + ": bins are not uniformly spaced");
    }
    return r;
}

}  // namespace netssa
