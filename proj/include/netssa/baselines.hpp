#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "netssa/result.hpp"
#include "netssa/stats.hpp"

namespace netssa {

enum class BaselineMethod { fourier, wavelet, kalman, astute };

inline std::string to_string(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::fourier: return "fourier";
        case BaselineMethod::wavelet: return "wavelet";
        case BaselineMethod::kalman: return "kalman";
        case BaselineMethod::astute: return "astute";
    }
    return "?";
}

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::fourier;
    double target_fpr = 2e-5;
    Index train_bins = 0;  // 0 = whole series

    double cutoff_period_seconds = 7200.0;  // fourier

    int wavelet_levels = 3;  // wavelet
    int cutoff_level = 3;

    // kalman: negative means fit on the training window
    double kalman_q = -1.0;
    double kalman_r = -1.0;

    bool astute_normalize = false;  // divide deltas by training-delta sd per feature
};

inline void validate(const BaselineConfig& c) {
    if (!(c.target_fpr > 0.0 && c.target_fpr < 1.0)) throw ParameterError("target_fpr must lie in (0,1)");
    if (c.train_bins < 0) throw ParameterError("train_bins must be >= 0");
    if (c.method == BaselineMethod::fourier && !(c.cutoff_period_seconds > 0))
        throw ParameterError("cutoff_period_seconds must be positive");
    if (c.method == BaselineMethod::wavelet && (c.cutoff_level < 1 || c.wavelet_levels < c.cutoff_level))
        throw ParameterError("wavelet levels must satisfy 1 <= cutoff_level <= wavelet_levels");
}

namespace detail {

inline Index train_span(const FlowSeries& s, const BaselineConfig& c) {
    if (c.train_bins == 0) return s.bins();
    if (c.train_bins < 2 || c.train_bins > s.bins()) throw ParameterError("train_bins out of range");
    return c.train_bins;
}

// Linear-interpolation quantile (type 7).
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline DetectionResult residual_result(const FlowSeries& s, const Matrix& residual, const BaselineConfig& c,
                                       std::string name) {
    Vector scores = residual.rowwise().norm();
    const Index tr = train_span(s, c);
    std::vector<double> train(scores.data(), scores.data() + tr);
    return make_result(s, std::move(scores), quantile(std::move(train), 1.0 - c.target_fpr), std::move(name));
}

}  // namespace detail

// Low-pass reconstruction keeping DFT bins whose period is >= the cutoff period.
inline Matrix fourier_baseline(const FlowSeries& s, double cutoff_period_seconds) {
    const Index n = s.bins();
    const double span = static_cast<double>(n) * static_cast<double>(s.bin_seconds);
    Eigen::FFT<double> fft;
    Matrix base(n, s.features());
    for (Index q = 0; q < s.features(); ++q) {
        std::vector<double> x(s.values.col(q).data(), s.values.col(q).data() + n);
        std::vector<std::complex<double>> spec;
        fft.fwd(spec, x);
        for (Index j = 0; j < n; ++j) {
            const double cycles = static_cast<double>(std::min(j, n - j));
            if (cycles * cutoff_period_seconds > span) spec[j] = 0.0;
        }
        std::vector<std::complex<double>> back;
        fft.inv(back, spec);
        for (Index t = 0; t < n; ++t) base(t, q) = back[t].real();
    }
    return base;
}

inline DetectionResult fourier_detect(const FlowSeries& s, const BaselineConfig& c) {
    validate(s);
    validate(c);
    if (s.bins() < 4) throw ParameterError("fourier_detect needs at least 4 bins");
    return detail::residual_result(s, s.values - fourier_baseline(s, c.cutoff_period_seconds), c, "fourier");
}

namespace wavelet {

// Daubechies scaling filter with 6 vanishing moments (12 taps), sum = sqrt(2).
inline constexpr std::array<double, 12> db6 = {
    0.11154074335010947,  0.49462389039845306,  0.7511339080210954,   0.31525035170919763,
    -0.22626469396543983, -0.12976686756726194, 0.09750160558732304,  0.027522865530305727,
    -0.03158203931748603, 0.0005538422011614961, 0.004777257510945511, -0.0010773010853084796};

inline constexpr Index filter_length = 12;

inline double dec_lo(Index j) { return db6[static_cast<std::size_t>(filter_length - 1 - j)]; }
inline double dec_hi(Index j) { return (j % 2 == 0 ? -1.0 : 1.0) * db6[static_cast<std::size_t>(j)]; }

// Half-sample symmetric extension, repeated as often as needed.
inline double extended(const Vector& x, Index i) {
    const Index n = x.size();
    const Index period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? x(i) : x(period - 1 - i);
}

struct Level {
    Vector approx;
    Vector detail;
};

inline Level dwt(const Vector& x) {
    const Index n = x.size();
    const Index out = (n + filter_length - 1) / 2;
    Level l{Vector::Zero(out), Vector::Zero(out)};
    for (Index i = 0; i < out; ++i)
        for (Index j = 0; j < filter_length; ++j) {
            const double v = extended(x, 2 * i + 1 - j);
            l.approx(i) += dec_lo(j) * v;
            l.detail(i) += dec_hi(j) * v;
        }
    return l;
}

inline Vector idwt(const Vector& approx, const Vector& detail, Index n) {
    Vector x = Vector::Zero(n);
    for (Index i = 0; i < approx.size(); ++i)
        for (Index j = 0; j < filter_length; ++j) {
            const Index t = 2 * i + 1 - j;
            if (t >= 0 && t < n) x(t) += dec_lo(j) * approx(i) + dec_hi(j) * detail(i);
        }
    return x;
}

struct Decomposition {
    Vector approx;                // deepest approximation
    std::vector<Vector> details;  // details[0] is level 1 (finest)
    std::vector<Index> lengths;   // input length at each level
};

inline Decomposition wavedec(const Vector& x, int levels) {
    Decomposition d;
    d.approx = x;
    for (int l = 0; l < levels; ++l) {
        d.lengths.push_back(d.approx.size());
        auto lv = dwt(d.approx);
        d.details.push_back(std::move(lv.detail));
        d.approx = std::move(lv.approx);
    }
    return d;
}

inline Vector waverec(const Decomposition& d) {
    Vector a = d.approx;
    for (auto l = static_cast<Index>(d.details.size()) - 1; l >= 0; --l)
        a = idwt(a, d.details[static_cast<std::size_t>(l)], d.lengths[static_cast<std::size_t>(l)]);
    return a;
}

}  // namespace wavelet

// Reconstruction with the details of levels 1..cutoff_level removed.
inline Matrix wavelet_baseline(const FlowSeries& s, int levels, int cutoff_level) {
    Matrix base(s.bins(), s.features());
    for (Index q = 0; q < s.features(); ++q) {
        auto d = wavelet::wavedec(s.values.col(q), levels);
        for (int l = 0; l < cutoff_level; ++l) d.details[static_cast<std::size_t>(l)].setZero();
        base.col(q) = wavelet::waverec(d);
    }
    return base;
}

inline DetectionResult wavelet_detect(const FlowSeries& s, const BaselineConfig& c) {
    validate(s);
    validate(c);
    if (s.bins() < wavelet::filter_length) throw ParameterError("series shorter than the db6 filter");
    return detail::residual_result(s, s.values - wavelet_baseline(s, c.wavelet_levels, c.cutoff_level), c,
                                   "wavelet");
}

struct LocalLevelFit {
    double q = 0.0;  // state (random-walk) variance
    double r = 0.0;  // observation variance
};

struct Innovations {
    Vector nu;
    Vector s;
};

inline Innovations local_level_filter(const Vector& y, double q, double r) {
    const Index n = y.size();
    Innovations out{Vector::Zero(n), Vector::Zero(n)};
    if (n == 0) return out;
    double x = y(0);
    double p = r * 1e3;
    for (Index t = 1; t < n; ++t) {
        const double pp = p + q;
        const double s = pp + r;
        const double v = y(t) - x;
        out.nu(t) = v;
        out.s(t) = s;
        if (s > 0) {
            const double gain = pp / s;
            x += gain * v;
            p = (1.0 - gain) * pp;
        } else {
            x = y(t);
            p = 0.0;
        }
    }
    return out;
}

// Concentrated Gaussian likelihood over a log grid of q/r; r is the profiled scale.
inline LocalLevelFit fit_local_level(const Vector& y) {
    const Index n = y.size();
    const Index burn = std::min<Index>(10, n / 4);
    LocalLevelFit best;
    double best_ll = -std::numeric_limits<double>::infinity();
    for (int g = 0; g <= 32; ++g) {
        const double ratio = std::pow(10.0, -6.0 + 0.25 * g);
        const auto in = local_level_filter(y, ratio, 1.0);
        double s2 = 0.0, logdet = 0.0;
        const Index cnt = n - 1 - burn;
        if (cnt < 1) break;
        for (Index t = 1 + burn; t < n; ++t) {
            s2 += in.nu(t) * in.nu(t) / in.s(t);
            logdet += std::log(in.s(t));
        }
        s2 /= static_cast<double>(cnt);
        if (s2 <= 0) return {0.0, 0.0};
        const double ll = -0.5 * (static_cast<double>(cnt) * std::log(s2) + logdet);
        if (ll > best_ll) {
            best_ll = ll;
            best = {ratio * s2, s2};
        }
    }
    return best;
}

inline double normalized_innovation(double nu, double s) {
    if (s > 0) return std::abs(nu) / std::sqrt(s);
    return nu == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

inline DetectionResult kalman_detect(const FlowSeries& s, const BaselineConfig& c) {
    validate(s);
    validate(c);
    const Index n = s.bins();
    const Index m = s.features();
    const Index tr = detail::train_span(s, c);
    Vector scores = Vector::Zero(n);
    for (Index q = 0; q < m; ++q) {
        LocalLevelFit fit{c.kalman_q, c.kalman_r};
        if (c.kalman_q < 0 || c.kalman_r < 0) {
            const auto f = fit_local_level(s.values.col(q).head(tr));
            if (c.kalman_q < 0) fit.q = f.q;
            if (c.kalman_r < 0) fit.r = f.r;
        }
        const auto in = local_level_filter(s.values.col(q), fit.q, fit.r);
        for (Index t = 1; t < n; ++t) scores(t) = std::max(scores(t), normalized_innovation(in.nu(t), in.s(t)));
    }
    const double thr = stats::normal_two_sided_quantile(c.target_fpr / static_cast<double>(m));
    return make_result(s, std::move(scores), thr, "kalman");
}

// mean(delta) / sd(delta, n-1) * sqrt(m).
inline double aav(const Vector& delta) {
    const Index m = delta.size();
    if (m < 2) throw ParameterError("AAV needs at least 2 flows");
    const double mean = delta.mean();
    const double var = (delta.array() - mean).square().sum() / static_cast<double>(m - 1);
    const double sd = std::sqrt(var);
    if (sd == 0.0) {
        if (mean == 0.0) return 0.0;
        return mean > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    }
    return mean / sd * std::sqrt(static_cast<double>(m));
}

inline DetectionResult astute_detect(const FlowSeries& s, const BaselineConfig& c) {
    validate(s);
    validate(c);
    const Index n = s.bins();
    const Index m = s.features();
    if (m < 2) throw ParameterError("astute_detect needs at least 2 flows");
    Matrix delta = Matrix::Zero(n, m);
    delta.bottomRows(n - 1) = s.values.bottomRows(n - 1) - s.values.topRows(n - 1);
    if (c.astute_normalize) {
        const Index tr = detail::train_span(s, c);
        for (Index q = 0; q < m; ++q) {
            const auto d = delta.col(q).segment(1, tr - 1);
            const double mean = d.mean();
            const double sd = std::sqrt((d.array() - mean).square().sum() / static_cast<double>(std::max<Index>(tr - 2, 1)));
            if (sd > 0) delta.col(q) /= sd;
        }
    }
    Vector scores = Vector::Zero(n);
    for (Index t = 1; t < n; ++t) scores(t) = std::abs(aav(delta.row(t).transpose()));
    return make_result(s, std::move(scores), stats::normal_two_sided_quantile(c.target_fpr), "astute");
}

inline DetectionResult baseline_detect(const FlowSeries& s, const BaselineConfig& c) {
    switch (c.method) {
        case BaselineMethod::fourier: return fourier_detect(s, c);
        case BaselineMethod::wavelet: return wavelet_detect(s, c);
        case BaselineMethod::kalman: return kalman_detect(s, c);
        case BaselineMethod::astute: return astute_detect(s, c);
    }
    throw ParameterError("unknown baseline method");
}

}  // namespace netssa
