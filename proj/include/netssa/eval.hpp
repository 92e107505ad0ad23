#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "netssa/result.hpp"
#include "netssa/simulator.hpp"

namespace netssa {

struct Episode {
    Index first = 0;
    Index last = 0;  // inclusive
};

inline std::vector<Episode> alarm_episodes(const std::vector<bool>& alarms) {
    std::vector<Episode> out;
    const auto n = static_cast<Index>(alarms.size());
    for (Index t = 0; t < n; ++t) {
        if (!alarms[t]) continue;
        if (!out.empty() && out.back().last == t - 1) {
            out.back().last = t;
        } else {
            out.push_back({t, t});
        }
    }
    return out;
}

// Bins an event can be credited on: [start - slack, end - 1 + slack + support], clipped.
inline Episode event_window(const AnomalyEvent& e, Index slack, Index support, Index n) {
    return {std::max<Index>(0, e.start_bin - slack), std::min<Index>(n - 1, e.end_bin() - 1 + slack + support)};
}

inline std::vector<AnomalyEvent> sorted_by_start(std::vector<AnomalyEvent> truth) {
    std::stable_sort(truth.begin(), truth.end(),
                     [](const AnomalyEvent& a, const AnomalyEvent& b) { return a.start_bin < b.start_bin; });
    return truth;
}

struct ConfusionCounts {
    Index true_positives = 0;
    Index false_positives = 0;
    Index false_negatives = 0;
    std::map<AnomalyType, Index> tp_by_type;
    std::map<AnomalyType, Index> fn_by_type;
};

inline ConfusionCounts match_alarms(const DetectionResult& r, const std::vector<AnomalyEvent>& truth,
                                    Index slack_bins = 1) {
    if (slack_bins < 0) throw ParameterError("slack_bins must be >= 0");
    const Index n = r.bins();
    const auto episodes = alarm_episodes(r.alarms);
    std::vector<bool> used(episodes.size(), false);
    ConfusionCounts c;
    for (auto t : kAnomalyTypes) {
        c.tp_by_type[t] = 0;
        c.fn_by_type[t] = 0;
    }
    for (const auto& e : sorted_by_start(truth)) {
        const auto w = event_window(e, slack_bins, r.support_bins, n);
        bool hit = false;
        for (std::size_t i = 0; i < episodes.size() && !hit; ++i) {
            if (used[i] || episodes[i].last < w.first || episodes[i].first > w.last) continue;
            used[i] = true;
            hit = true;
        }
        if (hit) {
            ++c.true_positives;
            ++c.tp_by_type[e.anomaly_type];
        } else {
            ++c.false_negatives;
            ++c.fn_by_type[e.anomaly_type];
        }
    }
    for (bool u : used) c.false_positives += u ? 0 : 1;
    return c;
}

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr)
};

enum class FpUnit {
    bins,      // alarmed normal bins / normal bins
    episodes,  // alarm episodes among normal bins / normal bins
};

struct RocOptions {
    Index slack_bins = 1;
    FpUnit fp_unit = FpUnit::bins;
    // Events neither counted as targets nor as normal traffic (e.g. other anomaly types).
    std::vector<AnomalyEvent> ignore;
};

namespace detail {

struct RocSetup {
    std::vector<Episode> windows;  // per target event, start order
    std::vector<bool> normal;
    std::vector<double> normal_sorted;
    bool disjoint = true;
};

inline RocSetup roc_setup(const DetectionResult& r, const std::vector<AnomalyEvent>& truth, const RocOptions& o) {
    const Index n = r.bins();
    RocSetup s;
    s.normal.assign(static_cast<std::size_t>(n), true);
    for (const auto& e : sorted_by_start(truth)) {
        const auto w = event_window(e, o.slack_bins, r.support_bins, n);
        if (!s.windows.empty() && w.first <= s.windows.back().last) s.disjoint = false;
        s.windows.push_back(w);
    }
    auto mask = [&](const Episode& w) {
        for (Index t = w.first; t <= w.last; ++t) s.normal[t] = false;
    };
    for (const auto& w : s.windows) mask(w);
    for (const auto& e : o.ignore) mask(event_window(e, o.slack_bins, r.support_bins, n));
    for (Index t = 0; t < n; ++t)
        if (s.normal[t]) s.normal_sorted.push_back(r.scores(t));
    std::sort(s.normal_sorted.begin(), s.normal_sorted.end());
    return s;
}

// Events detected at threshold tau, matching earliest-start first to unused alarm bins.
inline Index greedy_hits(const DetectionResult& r, const RocSetup& s, double tau, std::vector<char>& used) {
    Index hits = 0;
    for (const auto& w : s.windows) {
        for (Index t = w.first; t <= w.last; ++t) {
            if (r.scores(t) > tau && !used[t]) {
                used[t] = 1;
                ++hits;
                break;
            }
        }
    }
    for (const auto& w : s.windows)
        for (Index t = w.first; t <= w.last; ++t) used[t] = 0;
    return hits;
}

inline Index normal_episodes_above(const DetectionResult& r, const RocSetup& s, double tau) {
    Index count = 0;
    bool in_run = false;
    for (Index t = 0; t < r.bins(); ++t) {
        const bool on = s.normal[t] && r.scores(t) > tau;
        if (on && !in_run) ++count;
        in_run = on;
    }
    return count;
}

}  // namespace detail

inline RocCurve roc_curve(const DetectionResult& r, const std::vector<AnomalyEvent>& truth,
                          const RocOptions& o = {}) {
    if (truth.empty()) throw ParameterError("roc_curve needs at least one event");
    if (o.slack_bins < 0) throw ParameterError("slack_bins must be >= 0");
    const Index n = r.bins();
    for (const auto& e : truth)
        if (e.start_bin < 0 || e.end_bin() > n) throw AlignmentError("event lies outside the score series");
    const auto s = detail::roc_setup(r, truth, o);
    const auto n_events = static_cast<double>(s.windows.size());
    const auto n_normal = static_cast<double>(s.normal_sorted.size());

    std::vector<double> taus(r.scores.data(), r.scores.data() + n);
    std::sort(taus.begin(), taus.end(), std::greater<>());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    taus.push_back(-std::numeric_limits<double>::infinity());

    // With disjoint windows an event is detected exactly when its peak exceeds tau.
    std::vector<double> peaks;
    if (s.disjoint) {
        for (const auto& w : s.windows) peaks.push_back(r.scores.segment(w.first, w.last - w.first + 1).maxCoeff());
        std::sort(peaks.begin(), peaks.end());
    }
    std::vector<char> used(static_cast<std::size_t>(n), 0);

    RocCurve c;
    c.points.emplace_back(0.0, 0.0);
    double best_tpr = 0.0, best_fpr = 0.0;
    for (double tau : taus) {
        Index hits = 0;
        if (s.disjoint) {
            hits = static_cast<Index>(peaks.end() - std::upper_bound(peaks.begin(), peaks.end(), tau));
        } else {
            hits = detail::greedy_hits(r, s, tau, used);
        }
        double fp = 0.0;
        if (o.fp_unit == FpUnit::bins) {
            fp = static_cast<double>(s.normal_sorted.end() -
                                     std::upper_bound(s.normal_sorted.begin(), s.normal_sorted.end(), tau));
        } else {
            fp = static_cast<double>(detail::normal_episodes_above(r, s, tau));
        }
        best_tpr = std::max(best_tpr, static_cast<double>(hits) / n_events);
        best_fpr = std::max(best_fpr, n_normal > 0 ? fp / n_normal : 0.0);
        c.points.emplace_back(best_fpr, best_tpr);
    }
    c.points.emplace_back(1.0, 1.0);
    return c;
}

inline double auc(const RocCurve& c) {
    double a = 0.0;
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        const auto [x0, y0] = c.points[i - 1];
        const auto [x1, y1] = c.points[i];
        a += (x1 - x0) * (y0 + y1) / 2.0;
    }
    return a;
}

// Highest TPR reached without exceeding the given FPR.
inline double tpr_at_fpr(const RocCurve& c, double fpr) {
    double best = 0.0;
    for (const auto& [x, y] : c.points)
        if (x <= fpr) best = std::max(best, y);
    return best;
}

inline void write_roc_csv(std::ostream& os, const RocCurve& c) {
    csv::write_schema_line(os, "roc");
    os << "fpr,tpr\n";
    for (const auto& [x, y] : c.points) os << csv::format_double(x) << ',' << csv::format_double(y) << '\n';
}

struct CountsTable {
    std::vector<std::string> detectors;
    std::map<AnomalyType, std::vector<Index>> by_type;
    std::vector<Index> totals;
};

inline CountsTable per_type_counts(const std::map<std::string, DetectionResult>& results,
                                   const std::vector<AnomalyEvent>& truth, Index slack_bins = 1) {
    CountsTable t;
    for (auto type : kAnomalyTypes) t.by_type[type] = {};
    for (const auto& [name, r] : results) {
        const auto c = match_alarms(r, truth, slack_bins);
        t.detectors.push_back(name);
        for (auto type : kAnomalyTypes) t.by_type[type].push_back(c.tp_by_type.at(type));
        t.totals.push_back(c.true_positives);
    }
    return t;
}

inline void write_counts_csv(std::ostream& os, const CountsTable& t) {
    csv::write_schema_line(os, "counts");
    os << "type";
    for (const auto& d : t.detectors) os << ',' << d;
    os << '\n';
    for (auto type : kAnomalyTypes) {
        os << to_string(type);
        for (auto v : t.by_type.at(type)) os << ',' << v;
        os << '\n';
    }
    os << "total";
    for (auto v : t.totals) os << ',' << v;
    os << '\n';
}

struct FeatureMapPoint {
    double delta_packets = 0.0;
    double flow_count = 0.0;
    AnomalyType anomaly_type = AnomalyType::dos;
};

// x: largest |packet delta| entering or inside the span; y: largest distinct-count feature in the span.
inline std::vector<FeatureMapPoint> feature_map(const FlowSeries& s, const std::vector<AnomalyEvent>& truth) {
    std::vector<FeatureMapPoint> out;
    for (const auto& e : truth) {
        if (e.start_bin < 0 || e.end_bin() > s.bins()) throw AlignmentError("event lies outside the series");
        FeatureMapPoint p;
        p.anomaly_type = e.anomaly_type;
        for (Index t = std::max<Index>(1, e.start_bin); t < e.end_bin(); ++t)
            p.delta_packets = std::max(p.delta_packets,
                                       std::abs(s.values(t, feature::packets) - s.values(t - 1, feature::packets)));
        for (Index t = e.start_bin; t < e.end_bin(); ++t)
            for (Index q = 1; q < s.features(); ++q) p.flow_count = std::max(p.flow_count, s.values(t, q));
        out.push_back(p);
    }
    return out;
}

inline void write_feature_map_csv(std::ostream& os, const std::vector<FeatureMapPoint>& pts) {
    csv::write_schema_line(os, "feature_map");
    os << "delta_packets,flow_count,type\n";
    for (const auto& p : pts)
        os << csv::format_double(p.delta_packets) << ',' << csv::format_double(p.flow_count) << ','
           << to_string(p.anomaly_type) << '\n';
}

}  // namespace netssa
