#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "netssa/csv.hpp"
#include "netssa/timeseries.hpp"

namespace netssa {

using Rng = std::mt19937_64;

struct EmpiricalDistribution {
    std::vector<double> bin_edges;  // size = probabilities + 1
    std::vector<double> bin_probabilities;
};

inline void validate(const EmpiricalDistribution& d) {
    const auto nb = d.bin_probabilities.size();
    if (nb == 0 || d.bin_edges.size() != nb + 1) throw ParameterError("distribution: edges/probabilities mismatch");
    double sum = 0.0;
    for (double p : d.bin_probabilities) {
        if (!(p >= 0.0)) throw ParameterError("distribution: negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ParameterError("distribution: probabilities do not sum to 1");
    // A point mass is the one case with equal edges.
    const bool point = nb == 1 && d.bin_edges[0] == d.bin_edges[1];
    for (std::size_t i = 0; i + 1 < d.bin_edges.size() && !point; ++i)
        if (!(d.bin_edges[i] < d.bin_edges[i + 1])) throw ParameterError("distribution: edges not ascending");
}

inline EmpiricalDistribution point_mass(double v) { return {{v, v}, {1.0}}; }

inline EmpiricalDistribution fit_empirical(const std::vector<double>& samples, int n_bins) {
    if (samples.empty()) throw ParameterError("fit_empirical needs samples");
    if (n_bins < 1) throw ParameterError("fit_empirical needs n_bins >= 1");
    const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *lo_it, hi = *hi_it;
    if (lo == hi) return point_mass(lo);
    EmpiricalDistribution d;
    const double width = (hi - lo) / n_bins;
    for (int b = 0; b <= n_bins; ++b) d.bin_edges.push_back(b == n_bins ? hi : lo + b * width);
    std::vector<double> counts(static_cast<std::size_t>(n_bins), 0.0);
    for (double x : samples) {
        auto b = static_cast<int>((x - lo) / width);
        counts[static_cast<std::size_t>(std::clamp(b, 0, n_bins - 1))] += 1.0;
    }
    for (double c : counts) d.bin_probabilities.push_back(c / static_cast<double>(samples.size()));
    return d;
}

inline double sample(const EmpiricalDistribution& d, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double r = u(rng);
    std::size_t b = 0;
    double acc = d.bin_probabilities[0];
    while (r >= acc && b + 1 < d.bin_probabilities.size()) acc += d.bin_probabilities[++b];
    const double lo = d.bin_edges[b], hi = d.bin_edges[b + 1];
    return lo + (hi - lo) * u(rng);
}

enum class AnomalyType { dos, port_scan, large_file_transfer, prefix_outage, link_outage };

inline constexpr std::array<AnomalyType, 5> kAnomalyTypes = {AnomalyType::dos, AnomalyType::port_scan,
                                                            AnomalyType::large_file_transfer,
                                                            AnomalyType::prefix_outage, AnomalyType::link_outage};

inline std::string to_string(AnomalyType t) {
    switch (t) {
        case AnomalyType::dos: return "dos";
        case AnomalyType::port_scan: return "port_scan";
        case AnomalyType::large_file_transfer: return "large_file_transfer";
        case AnomalyType::prefix_outage: return "prefix_outage";
        case AnomalyType::link_outage: return "link_outage";
    }
    return "?";
}

inline AnomalyType anomaly_type_from_string(std::string_view s) {
    for (auto t : kAnomalyTypes)
        if (to_string(t) == s) return t;
    throw ParseError("unknown anomaly type '" + std::string(s) + "'");
}

struct AnomalyProfile {
    AnomalyType anomaly_type = AnomalyType::dos;
    EmpiricalDistribution interarrival_dist;  // bins between consecutive event starts
    EmpiricalDistribution duration_dist;      // bins
    EmpiricalDistribution magnitude_dist;     // packets, flows, or outage share
    double type_probability = 1.0;
};

struct AnomalyEvent {
    AnomalyType anomaly_type = AnomalyType::dos;
    Index start_bin = 0;
    Index duration_bins = 1;
    double magnitude = 0.0;

    Index end_bin() const { return start_bin + duration_bins; }  // exclusive
};

struct InjectedTrace {
    FlowSeries series;
    std::vector<AnomalyEvent> truth;
};

// Per-flow increments on the 5-feature layout; a scan flow carries few packets.
struct ShapeParams {
    std::array<double, 5> scan_per_flow = {1.5, 0.37, 0.42, 0.83, 0.75};
    int dos_max_sources = 3;
};

inline void apply_shape(Matrix& v, const AnomalyEvent& e, const ShapeParams& sp, Rng& rng) {
    const Index m = v.cols();
    const Index used = std::min<Index>(m, 5);
    auto rows = v.middleRows(e.start_bin, e.duration_bins);
    switch (e.anomaly_type) {
        case AnomalyType::dos: {
            std::uniform_int_distribution<int> nsrc(1, sp.dos_max_sources);
            const double k = nsrc(rng);
            rows.col(feature::packets).array() += e.magnitude;
            if (m > feature::src_ports) {
                rows.col(feature::src_ips).array() += k;
                rows.col(feature::src_ports).array() += k;
            }
            break;
        }
        case AnomalyType::port_scan:
            for (Index q = 0; q < used; ++q) rows.col(q).array() += e.magnitude * sp.scan_per_flow[q];
            break;
        case AnomalyType::large_file_transfer:
            rows.col(feature::packets).array() += e.magnitude;
            break;
        case AnomalyType::prefix_outage:
            rows *= 1.0 - std::clamp(e.magnitude, 0.0, 1.0);
            break;
        case AnomalyType::link_outage:
            rows.setZero();
            break;
    }
    rows = rows.cwiseMax(0.0);
}

inline InjectedTrace inject_anomalies(const FlowSeries& base, const std::vector<AnomalyProfile>& profiles,
                                      std::uint64_t seed, const ShapeParams& shapes = {}) {
    validate(base);
    if (profiles.empty()) throw ParameterError("inject_anomalies needs at least one profile");
    double psum = 0.0;
    for (const auto& p : profiles) {
        validate(p.interarrival_dist);
        validate(p.duration_dist);
        validate(p.magnitude_dist);
        psum += p.type_probability;
    }
    if (std::abs(psum - 1.0) > 1e-9) throw ParameterError("profile type probabilities must sum to 1");

    InjectedTrace out{base, {}};
    const Index n = base.bins();
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Index anchor = 0;    // start of the previous event (or 0)
    Index busy_to = 0;   // end of the previous event
    constexpr int kMaxRetries = 100;
    while (anchor < n) {
        bool placed = false;
        bool past_end = false;
        Index last_gap = 1;
        for (int attempt = 0; attempt < kMaxRetries && !placed; ++attempt) {
            double r = u(rng);
            std::size_t pi = 0;
            while (pi + 1 < profiles.size() && r >= profiles[pi].type_probability) r -= profiles[pi++].type_probability;
            const auto& prof = profiles[pi];
            const auto gap = std::max<Index>(1, static_cast<Index>(std::floor(sample(prof.interarrival_dist, rng))));
            const auto dur = std::max<Index>(1, static_cast<Index>(std::floor(sample(prof.duration_dist, rng))));
            const double mag = sample(prof.magnitude_dist, rng);
            last_gap = gap;
            const Index start = anchor + gap;
            if (start >= n) {
                past_end = true;
                break;
            }
            if (start < busy_to || start + dur > n) continue;
            AnomalyEvent e{prof.anomaly_type, start, dur, mag};
            apply_shape(out.series.values, e, shapes, rng);
            out.truth.push_back(e);
            anchor = start;
            busy_to = e.end_bin();
            placed = true;
        }
        if (past_end) break;
        if (!placed) anchor += last_gap;
    }
    return out;
}

// Smooth diurnal total volume V(t) and a background small-flow factor S(t), each
// loading the 5 features with its own profile, plus independent per-feature noise.
struct BaseTraceParams {
    Index bins = 6000;
    std::int64_t bin_seconds = 300;
    double period_bins = 288.0;
    std::array<double, 5> volume_loading = {95500.0, 900.0, 1250.0, 7500.0, 5750.0};
    double background_flows = 3000.0;  // loading = background_flows * scan_per_flow
    std::array<double, 5> noise_sd = {450.0, 45.0, 50.0, 100.0, 90.0};
    double ar_rho = 0.95;
    double ar_sd = 0.002;
};

inline FlowSeries synthetic_base_trace(const BaseTraceParams& bp, std::uint64_t seed, const ShapeParams& sp = {}) {
    if (bp.bins < 2) throw ParameterError("base trace needs at least 2 bins");
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> g;
    const double ph = u(rng), ps = u(rng);
    const Index n = bp.bins;
    auto ar = [&]() {
        Vector a = Vector::Zero(n);
        for (Index i = 1; i < n; ++i) a(i) = bp.ar_rho * a(i - 1) + bp.ar_sd * g(rng);
        return a;
    };
    const Vector av = ar();
    const Vector as = ar();
    Matrix v(n, 5);
    const double w = 2.0 * std::numbers::pi / bp.period_bins;
    for (Index t = 0; t < n; ++t) {
        const double tt = static_cast<double>(t);
        const double vol = 1.0 + 0.4 * std::sin(w * tt + ph) + 0.1 * std::sin(2.0 * w * tt + 1.7 * ph) + av(t);
        const double bg = 1.0 + 0.3 * std::sin(w * tt + ps) + as(t);
        for (Index q = 0; q < 5; ++q) {
            const double x = vol * bp.volume_loading[q] + bg * bp.background_flows * sp.scan_per_flow[q] +
                             bp.noise_sd[q] * g(rng);
            v(t, q) = std::max(x, 0.0);
        }
    }
    return make_series(std::move(v), bp.bin_seconds, flow_feature_names(), 0);
}

// Histogram of scale*(1 + Y/2), Y ~ Lomax(alpha), capped at cap_factor*scale.
inline EmpiricalDistribution heavy_tail_histogram(double scale, double alpha, double cap_factor, int n_bins) {
    EmpiricalDistribution d;
    const double hi = cap_factor * scale;
    const double width = (hi - scale) / n_bins;
    auto cdf = [&](double x) { return 1.0 - std::pow(1.0 + 2.0 * (x / scale - 1.0), -alpha); };
    double prev = 0.0;
    for (int b = 0; b <= n_bins; ++b) d.bin_edges.push_back(b == n_bins ? hi : scale + b * width);
    for (int b = 1; b <= n_bins; ++b) {
        const double c = b == n_bins ? 1.0 : cdf(d.bin_edges[static_cast<std::size_t>(b)]);
        d.bin_probabilities.push_back(c - prev);
        prev = c;
    }
    return d;
}

inline EmpiricalDistribution uniform_histogram(double lo, double hi, int n_bins) {
    EmpiricalDistribution d;
    for (int b = 0; b <= n_bins; ++b) d.bin_edges.push_back(b == n_bins ? hi : lo + (hi - lo) * b / n_bins);
    d.bin_probabilities.assign(static_cast<std::size_t>(n_bins), 1.0 / n_bins);
    return d;
}

struct DefaultProfileParams {
    double dos_probability = 0.4;
    double dos_scale = 12000.0;   // packets
    double scan_scale = 300.0;    // flows
    double gap_lo = 50.0;
    double gap_hi = 150.0;
};

// Synthetic stand-ins for the fitted timing/size histograms; not measured from real traces.
inline std::vector<AnomalyProfile> default_profiles(const DefaultProfileParams& p = {}) {
    std::vector<AnomalyProfile> out;
    const auto gaps = uniform_histogram(p.gap_lo, p.gap_hi, 10);
    if (p.dos_probability > 0)
        out.push_back({AnomalyType::dos, gaps, uniform_histogram(1.0, 4.0, 3),
                       heavy_tail_histogram(p.dos_scale, 1.5, 20.0, 38), p.dos_probability});
    if (p.dos_probability < 1)
        out.push_back({AnomalyType::port_scan, gaps, uniform_histogram(1.0, 5.0, 4),
                       heavy_tail_histogram(p.scan_scale, 2.5, 8.0, 14), 1.0 - p.dos_probability});
    return out;
}

inline constexpr const char* kProfileHeader = "anomaly_type,type_probability,dist,lower,upper,probability";

inline void write_profile_csv(std::ostream& os, const AnomalyProfile& p) {
    csv::write_schema_line(os, "profile");
    os << kProfileHeader << '\n';
    auto emit = [&](const char* name, const EmpiricalDistribution& d) {
        for (std::size_t b = 0; b < d.bin_probabilities.size(); ++b)
            os << to_string(p.anomaly_type) << ',' << csv::format_double(p.type_probability) << ',' << name << ','
               << csv::format_double(d.bin_edges[b]) << ',' << csv::format_double(d.bin_edges[b + 1]) << ','
               << csv::format_double(d.bin_probabilities[b]) << '\n';
    };
    emit("interarrival", p.interarrival_dist);
    emit("duration", p.duration_dist);
    emit("magnitude", p.magnitude_dist);
}

inline AnomalyProfile read_profile_csv(std::istream& is) {
    const auto t = csv::read_table(is);
    const auto fields = csv::split(kProfileHeader);
    const std::vector<std::string> header(fields.begin(), fields.end());
    if (t.header != header) throw ParseError(std::string("profile file: header must be ") + kProfileHeader);
    if (t.rows.empty()) throw ParseError("profile file: no rows");
    AnomalyProfile p;
    EmpiricalDistribution* dists[3] = {&p.interarrival_dist, &p.duration_dist, &p.magnitude_dist};
    const char* names[3] = {"interarrival", "duration", "magnitude"};
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto no = t.line_numbers[i];
        const auto type = anomaly_type_from_string(row[0]);
        const double tp = csv::parse_double(row[1], no, "type_probability");
        if (i == 0) {
            p.anomaly_type = type;
            p.type_probability = tp;
        } else if (type != p.anomaly_type || tp != p.type_probability) {
            throw ParseError(csv::where(no) + ": profile rows disagree on type or probability");
        }
        int which = -1;
        for (int k = 0; k < 3; ++k)
            if (row[2] == names[k]) which = k;
        if (which < 0) throw ParseError(csv::where(no) + ": unknown dist '" + row[2] + "'");
        auto& d = *dists[which];
        const double lo = csv::parse_double(row[3], no, "lower");
        const double hi = csv::parse_double(row[4], no, "upper");
        const double pr = csv::parse_double(row[5], no, "probability");
        if (d.bin_edges.empty()) {
            d.bin_edges.push_back(lo);
        } else if (d.bin_edges.back() != lo) {
            throw ParseError(csv::where(no) + ": bins of '" + row[2] + "' are not contiguous");
        }
        d.bin_edges.push_back(hi);
        d.bin_probabilities.push_back(pr);
    }
    for (int k = 0; k < 3; ++k) {
        auto& d = *dists[k];
        if (d.bin_probabilities.empty()) throw ParseError(std::string("profile file: missing dist ") + names[k]);
        double sum = 0.0;
        for (double pr : d.bin_probabilities) sum += pr;
        if (std::abs(sum - 1.0) > 1e-6) throw ParseError(std::string("profile file: ") + names[k] + " does not sum to 1");
        for (double& pr : d.bin_probabilities) pr /= sum;
        try {
            validate(d);
        } catch (const ParameterError& e) {
            throw ParseError(std::string("profile file: ") + e.what());
        }
    }
    return p;
}

inline void write_truth_csv(std::ostream& os, const std::vector<AnomalyEvent>& truth) {
    csv::write_schema_line(os, "truth");
    os << "type,start_bin,duration_bins,magnitude\n";
    for (const auto& e : truth)
        os << to_string(e.anomaly_type) << ',' << e.start_bin << ',' << e.duration_bins << ','
           << csv::format_double(e.magnitude) << '\n';
}

inline std::vector<AnomalyEvent> read_truth_csv(std::istream& is) {
    const auto t = csv::read_table(is);
    if (t.header != std::vector<std::string>{"type", "start_bin", "duration_bins", "magnitude"})
        throw ParseError("truth file: header must be type,start_bin,duration_bins,magnitude");
    std::vector<AnomalyEvent> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const auto no = t.line_numbers[i];
        AnomalyEvent e;
        e.anomaly_type = anomaly_type_from_string(row[0]);
        e.start_bin = csv::parse_int<Index>(row[1], no, "start_bin");
        e.duration_bins = csv::parse_int<Index>(row[2], no, "duration_bins");
        e.magnitude = csv::parse_double(row[3], no, "magnitude");
        if (e.start_bin < 0 || e.duration_bins < 1) throw ParseError(csv::where(no) + ": bad event extent");
        out.push_back(e);
    }
    return out;
}

}  // namespace netssa
