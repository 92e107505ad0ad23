#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "netssa/netssa.hpp"

namespace netssa::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
    ok = 0,
    usage = 1,
    parse_error = 2,
    parameter_error = 3,
    io_error = 4,
    alignment_error = 5,
    internal_error = 6,
};

// Flat `key = value` configuration; later sets (command-line flags) override earlier ones.
class Config {
public:
    static Config parse(std::istream& is, const std::string& origin = "config") {
        Config c;
        std::string line;
        std::size_t no = 0;
        while (std::getline(is, line)) {
            ++no;
            if (csv::is_skippable(line)) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ParseError(origin + ":" + std::to_string(no) + ": expected key = value");
            const auto key = std::string(csv::trim(std::string_view(line).substr(0, eq)));
            const auto val = std::string(csv::trim(std::string_view(line).substr(eq + 1)));
            if (key.empty()) throw ParseError(origin + ":" + std::to_string(no) + ": empty key");
            c.values_[key] = val;
        }
        return c;
    }

    static Config load(const fs::path& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot read config file " + path.string());
        return parse(in, path.string());
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& def = "") const {
        auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    std::string required(const std::string& key) const {
        if (!has(key) || str(key).empty()) throw ParameterError("missing required setting '" + key + "'");
        return str(key);
    }

    long long integer(const std::string& key, long long def) const {
        if (!has(key)) return def;
        try {
            return csv::parse_int<long long>(str(key), 0, key);
        } catch (const ParseError&) {
            throw ParameterError("setting '" + key + "' must be an integer, got '" + str(key) + "'");
        }
    }

    double real(const std::string& key, double def) const {
        if (!has(key)) return def;
        try {
            return csv::parse_double(str(key), 0, key);
        } catch (const ParseError&) {
            throw ParameterError("setting '" + key + "' must be a number, got '" + str(key) + "'");
        }
    }

    bool flag(const std::string& key, bool def) const {
        if (!has(key)) return def;
        const auto v = str(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ParameterError("setting '" + key + "' must be true or false, got '" + v + "'");
    }

    std::vector<std::string> list(const std::string& key, const std::string& def = "") const {
        std::vector<std::string> out;
        const std::string text = str(key, def);
        for (auto f : csv::split(text))
            if (!f.empty()) out.emplace_back(f);
        return out;
    }

private:
    std::map<std::string, std::string> values_;
};

inline std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read " + p.string());
    return in;
}

// Writes through a temporary file so readers never see partial output.
inline void write_file(const fs::path& p, const std::function<void(std::ostream&)>& body) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + p.parent_path().string());
    }
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write " + p.string());
        body(out);
        if (!out) throw IoError("write failed for " + p.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("cannot move output into place: " + p.string());
}

inline FlowSeries load_series(const fs::path& p) {
    auto in = open_in(p);
    return read_series_csv(in);
}

inline std::vector<AnomalyEvent> load_truth(const fs::path& p) {
    auto in = open_in(p);
    return read_truth_csv(in);
}

inline DetectionResult load_result(const fs::path& p) {
    auto in = open_in(p);
    return read_result_csv(in);
}

inline const std::vector<std::string>& all_detectors() {
    static const std::vector<std::string> d = {"mssa", "fourier", "wavelet", "kalman", "astute"};
    return d;
}

inline std::vector<std::string> detector_list(const Config& c) {
    auto names = c.list("detectors", "mssa");
    if (names.size() == 1 && names[0] == "all") return all_detectors();
    for (const auto& n : names)
        if (n != "lds" && std::find(all_detectors().begin(), all_detectors().end(), n) == all_detectors().end())
            throw ParameterError("setting 'detectors': unknown detector '" + n + "'");
    return names;
}

inline Index default_train_bins(const Config& c, Index n, Index ell) {
    const auto tb = c.integer("train_bins", std::max<long long>(n / 3, ell + 1));
    if (tb < ell + 1) throw ParameterError("setting 'train_bins' must be >= ell + 1");
    return static_cast<Index>(tb);
}

inline DetectorConfig mssa_config(const Config& c, Index n) {
    DetectorConfig d;
    d.ell = static_cast<Index>(c.integer("ell", 1));
    if (d.ell < 1) throw ParameterError("setting 'ell' must be >= 1");
    const auto k = c.str("k", "auto");
    if (k != "auto") {
        const auto kv = c.integer("k", 0);
        if (kv < 1) throw ParameterError("setting 'k' must be >= 1 or auto");
        d.k = static_cast<Index>(kv);
    }
    d.beta = c.real("beta", 1e-3);
    if (!(d.beta > 0 && d.beta < 1)) throw ParameterError("setting 'beta' must lie in (0,1)");
    d.train_bins = default_train_bins(c, n, d.ell);
    d.standardize = c.flag("standardize", false);
    d.fit_whole_series = c.flag("fit_whole_series", false);
    d.separability_cutoff = c.real("separability_cutoff", 0.3);
    const auto variant = c.str("qbeta_variant", "standard");
    if (variant == "literal") {
        d.qbeta_variant = QBetaVariant::literal;
    } else if (variant != "standard") {
        throw ParameterError("setting 'qbeta_variant' must be standard or literal");
    }
    if (c.has("threshold")) {
        d.threshold_mode = ThresholdMode::fixed;
        d.fixed_threshold = c.real("threshold", 0.0);
    }
    return d;
}

inline BaselineConfig baseline_config(const Config& c, const std::string& name, Index n) {
    BaselineConfig b;
    if (name == "fourier") b.method = BaselineMethod::fourier;
    else if (name == "wavelet") b.method = BaselineMethod::wavelet;
    else if (name == "kalman") b.method = BaselineMethod::kalman;
    else if (name == "astute") b.method = BaselineMethod::astute;
    else throw ParameterError("unknown baseline '" + name + "'");
    b.target_fpr = c.real("target_fpr", 2e-5);
    b.train_bins = c.has("train_bins") ? static_cast<Index>(c.integer("train_bins", 0)) : std::max<Index>(n / 3, 2);
    b.cutoff_period_seconds = c.real("cutoff_period", 7200.0);
    b.wavelet_levels = static_cast<int>(c.integer("wavelet_levels", 3));
    b.cutoff_level = static_cast<int>(c.integer("cutoff_level", 3));
    b.kalman_q = c.real("kalman_q", -1.0);
    b.kalman_r = c.real("kalman_r", -1.0);
    b.astute_normalize = c.flag("astute_normalize", false);
    validate(b);
    return b;
}

inline DetectionResult run_detector(const FlowSeries& s, const Config& c, const std::string& name) {
    if (name == "mssa") return detect(s, mssa_config(c, s.bins()));
    if (name == "lds") {
        const auto ell = static_cast<Index>(c.integer("ell", 4));
        const auto k = static_cast<Index>(c.integer("k", 1));
        LdsThreshold thr;
        thr.beta = c.real("beta", 1e-3);
        return lds_residual(s, estimate_lds(s, ell, k), thr);
    }
    return baseline_detect(s, baseline_config(c, name, s.bins()));
}

inline fs::path out_dir(const Config& c) { return fs::path(c.str("out", ".")); }

inline std::map<std::string, DetectionResult> cmd_detect(const Config& c, std::ostream& log) {
    const auto series = load_series(c.required("input"));
    std::map<std::string, DetectionResult> results;
    for (const auto& name : detector_list(c)) {
        auto r = run_detector(series, c, name);
        write_file(out_dir(c) / (name + ".csv"), [&](std::ostream& os) { write_result_csv(os, r); });
        log << name << " alarms=" << alarm_count(r) << " threshold=" << csv::format_double(r.threshold) << '\n';
        results.emplace(name, std::move(r));
    }
    return results;
}

inline std::uint64_t seed_of(const Config& c) {
    if (!c.has("seed")) return 1;
    try {
        return csv::parse_int<std::uint64_t>(c.str("seed"), 0, "seed");
    } catch (const ParseError&) {
        throw ParameterError("setting 'seed' must be an unsigned 64-bit integer");
    }
}

inline std::vector<AnomalyProfile> simulation_profiles(const Config& c) {
    const auto files = c.list("profiles");
    if (files.empty()) {
        DefaultProfileParams p;
        p.dos_probability = c.real("dos_probability", p.dos_probability);
        p.dos_scale = c.real("dos_scale", p.dos_scale);
        p.scan_scale = c.real("scan_scale", p.scan_scale);
        if (!(p.dos_probability >= 0 && p.dos_probability <= 1))
            throw ParameterError("setting 'dos_probability' must lie in [0,1]");
        return default_profiles(p);
    }
    std::vector<AnomalyProfile> out;
    for (const auto& f : files) {
        auto in = open_in(f);
        out.push_back(read_profile_csv(in));
    }
    return out;
}

inline InjectedTrace simulate_trace(const Config& c) {
    const auto seed = seed_of(c);
    FlowSeries base;
    if (c.has("base")) {
        base = load_series(c.str("base"));
    } else {
        BaseTraceParams bp;
        bp.bins = static_cast<Index>(c.integer("bins", 6000));
        if (bp.bins < 2) throw ParameterError("setting 'bins' must be >= 2");
        base = synthetic_base_trace(bp, seed);
    }
    return inject_anomalies(base, simulation_profiles(c), seed ^ 0x9e3779b97f4a7c15ULL);
}

inline InjectedTrace cmd_simulate(const Config& c, std::ostream& log) {
    auto trace = simulate_trace(c);
    write_file(out_dir(c) / "series.csv", [&](std::ostream& os) { write_series_csv(os, trace.series); });
    write_file(out_dir(c) / "truth.csv", [&](std::ostream& os) { write_truth_csv(os, trace.truth); });
    log << "bins=" << trace.series.bins() << " events=" << trace.truth.size() << '\n';
    return trace;
}

inline void check_alignment(const DetectionResult& r, Index n, std::int64_t start, std::int64_t step,
                            const std::string& what) {
    if (r.bins() != n || (n > 0 && r.start_time != start) || (n > 1 && r.bin_seconds != step))
        throw AlignmentError(what + " does not share the reference time base");
}

inline void check_truth_fits(const std::vector<AnomalyEvent>& truth, Index n) {
    for (const auto& e : truth)
        if (e.end_bin() > n) throw AlignmentError("truth event at bin " + std::to_string(e.start_bin) +
                                                  " extends past the " + std::to_string(n) + "-bin series");
}

inline RocOptions roc_options(const Config& c) {
    RocOptions o;
    o.slack_bins = static_cast<Index>(c.integer("slack", 1));
    if (o.slack_bins < 0) throw ParameterError("setting 'slack' must be >= 0");
    const auto unit = c.str("fpr_unit", "bins");
    if (unit == "episodes") o.fp_unit = FpUnit::episodes;
    else if (unit != "bins") throw ParameterError("setting 'fpr_unit' must be bins or episodes");
    return o;
}

inline std::map<std::string, double> cmd_evaluate(const Config& c, std::ostream& log) {
    const auto truth = load_truth(c.required("truth"));
    if (truth.empty()) throw ParameterError("truth file has no events; TPR is undefined");
    std::map<std::string, DetectionResult> results;
    for (const auto& path : c.list("results")) {
        auto r = load_result(path);
        if (r.detector_name.empty()) r.detector_name = fs::path(path).stem().string();
        results.emplace(r.detector_name, std::move(r));
    }
    if (results.empty()) throw ParameterError("setting 'results' lists no detection files");
    const auto& ref = results.begin()->second;
    const Index n = ref.bins();
    for (const auto& [name, r] : results) check_alignment(r, n, ref.start_time, ref.bin_seconds, "result " + name);
    check_truth_fits(truth, n);

    std::optional<FlowSeries> series;
    if (c.has("input")) {
        series = load_series(c.str("input"));
        if (series->bins() != n || series->start_time != ref.start_time || series->bin_seconds != ref.bin_seconds)
            throw AlignmentError("series does not share the results' time base");
    }

    const auto opts = roc_options(c);
    std::map<std::string, double> aucs;
    for (const auto& [name, r] : results) {
        const auto curve = roc_curve(r, truth, opts);
        write_file(out_dir(c) / ("roc_" + name + ".csv"), [&](std::ostream& os) { write_roc_csv(os, curve); });
        aucs[name] = auc(curve);
    }
    write_file(out_dir(c) / "auc.csv", [&](std::ostream& os) {
        csv::write_schema_line(os, "auc");
        os << "detector,auc\n";
        for (const auto& [name, a] : aucs) os << name << ',' << csv::format_double(a) << '\n';
    });
    const auto counts = per_type_counts(results, truth, opts.slack_bins);
    write_file(out_dir(c) / "counts.csv", [&](std::ostream& os) { write_counts_csv(os, counts); });
    if (series) {
        const auto fm = feature_map(*series, truth);
        write_file(out_dir(c) / "feature_map.csv", [&](std::ostream& os) { write_feature_map_csv(os, fm); });
    }
    for (const auto& [name, a] : aucs) log << name << " auc=" << csv::format_double(a) << '\n';
    return aucs;
}

struct SweepRow {
    std::string ell, k, beta, detector, subset;
    double auc = 0.0;
    double tpr = 0.0;
};

inline std::vector<std::pair<std::string, std::vector<AnomalyEvent>>> truth_subsets(
    const std::vector<AnomalyEvent>& truth) {
    std::vector<AnomalyEvent> dos, scan;
    for (const auto& e : truth) {
        if (e.anomaly_type == AnomalyType::dos) dos.push_back(e);
        if (e.anomaly_type == AnomalyType::port_scan) scan.push_back(e);
    }
    return {{"dos", dos}, {"port_scan", scan}, {"all", truth}};
}

inline void score_subsets(const DetectionResult& r, const std::vector<AnomalyEvent>& truth, const RocOptions& base,
                          double fpr, SweepRow proto, std::vector<SweepRow>& out) {
    for (const auto& [name, subset] : truth_subsets(truth)) {
        SweepRow row = proto;
        row.subset = name;
        if (subset.empty()) {
            row.auc = std::numeric_limits<double>::quiet_NaN();
            row.tpr = std::numeric_limits<double>::quiet_NaN();
        } else {
            RocOptions o = base;
            for (const auto& e : truth)
                if (name != "all" && e.anomaly_type != subset.front().anomaly_type) o.ignore.push_back(e);
            const auto curve = roc_curve(r, subset, o);
            row.auc = auc(curve);
            row.tpr = tpr_at_fpr(curve, fpr);
        }
        out.push_back(row);
    }
}

inline std::vector<SweepRow> cmd_sweep(const Config& c, std::ostream& log) {
    const auto series = load_series(c.required("input"));
    const auto truth = load_truth(c.required("truth"));
    check_truth_fits(truth, series.bins());
    const auto ells = c.list("sweep_ell", c.str("ell", "1"));
    const auto ks = c.list("sweep_k", c.str("k", "auto"));
    const auto betas = c.list("sweep_beta", c.str("beta", "0.001"));
    if (ells.empty() || ks.empty() || betas.empty()) throw ParameterError("sweep grids must be non-empty");
    const auto opts = roc_options(c);
    const double fpr = c.real("sweep_fpr", 1e-4);

    struct Point {
        std::string ell, k, beta;
    };
    std::vector<Point> grid;
    for (const auto& e : ells)
        for (const auto& k : ks)
            for (const auto& b : betas) grid.push_back({e, k, b});
    for (const auto& p : grid) {
        Config pc = c;
        pc.set("ell", p.ell);
        pc.set("k", p.k);
        pc.set("beta", p.beta);
        mssa_config(pc, series.bins());  // reject bad grid values before any work starts
    }

    std::vector<std::vector<SweepRow>> per_point(grid.size());
    const auto workers = static_cast<std::size_t>(std::max<long long>(1, c.integer("workers", 1)));
    std::size_t next = 0;
    std::mutex mu;
    std::exception_ptr failure;
    auto work = [&]() {
        while (true) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= grid.size() || failure) return;
                i = next++;
            }
            try {
                Config pc = c;
                pc.set("ell", grid[i].ell);
                pc.set("k", grid[i].k);
                pc.set("beta", grid[i].beta);
                const auto r = detect(series, mssa_config(pc, series.bins()));
                std::vector<SweepRow> rows;
                score_subsets(r, truth, opts, fpr, {grid[i].ell, grid[i].k, grid[i].beta, "mssa", "", 0, 0}, rows);
                per_point[i] = std::move(rows);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < std::min(workers, grid.size()); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<SweepRow> rows;
    for (auto& p : per_point) rows.insert(rows.end(), p.begin(), p.end());
    for (const auto& name : c.list("detectors", "mssa")) {
        if (name == "mssa") continue;
        const auto r = run_detector(series, c, name);
        score_subsets(r, truth, opts, fpr, {"-", "-", "-", name, "", 0, 0}, rows);
    }
    write_file(out_dir(c) / "sweep.csv", [&](std::ostream& os) {
        csv::write_schema_line(os, "sweep");
        os << "ell,k,beta,detector,subset,auc,tpr_at_fpr\n";
        for (const auto& r : rows)
            os << r.ell << ',' << r.k << ',' << r.beta << ',' << r.detector << ',' << r.subset << ','
               << csv::format_double(r.auc) << ',' << csv::format_double(r.tpr) << '\n';
    });
    log << "sweep rows=" << rows.size() << '\n';
    return rows;
}

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return parse_error;
    // A model order above the data's rank, or an ill-fitting shape, is a bad setting.
    if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const RankError*>(&e) ||
        dynamic_cast<const ShapeError*>(&e))
        return parameter_error;
    if (dynamic_cast<const IoError*>(&e)) return io_error;
    if (dynamic_cast<const AlignmentError*>(&e)) return alignment_error;
    return internal_error;
}

}  // namespace netssa::cli
