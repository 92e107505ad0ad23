#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "netssa/hankel.hpp"
#include "netssa/result.hpp"
#include "netssa/stats.hpp"

namespace netssa {

inline Matrix lag_covariance(const TrajectoryMatrix& h) {
    const Index p = h.data.cols();
    Matrix c = Matrix::Zero(p, p);
    c.selfadjointView<Eigen::Lower>().rankUpdate(h.data.transpose());
    return c.selfadjointView<Eigen::Lower>();
}

struct SpectralDecomposition {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // columns U_i
    Matrix right_vectors; // columns V_i = Y U_i / sqrt(lambda_i); empty when built from C alone
    Index ell = 0;
    Index m = 0;

    Index size() const { return eigenvalues.size(); }
};

inline SpectralDecomposition decompose(const Matrix& c, Index ell = 0, Index m = 1) {
    if (c.rows() != c.cols() || c.rows() == 0) throw ShapeError("decompose: matrix must be square");
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw ShapeError("decompose: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(c);
    if (es.info() != Eigen::Success) throw ShapeError("decompose: eigensolver failed");
    SpectralDecomposition d;
    const Index p = c.rows();
    d.eigenvalues = es.eigenvalues().reverse();
    d.eigenvectors = es.eigenvectors().rowwise().reverse();
    for (Index i = 0; i < p; ++i)
        if (d.eigenvalues(i) < 0 && d.eigenvalues(i) >= -1e-10 * scale) d.eigenvalues(i) = 0;
    d.ell = ell > 0 ? ell : p;
    d.m = ell > 0 ? m : 1;
    return d;
}

// With fewer windows than lagged coordinates the nonzero spectrum comes from the smaller
// Gram matrix Y Y^T; a Householder QR of the mapped vectors completes the null space.
inline SpectralDecomposition gram_decompose(const TrajectoryMatrix& h) {
    const Index p = h.data.cols();
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.data * h.data.transpose());
    if (es.info() != Eigen::Success) throw ShapeError("decompose: eigensolver failed");
    const Vector g = es.eigenvalues().reverse();
    const Matrix v = es.eigenvectors().rowwise().reverse();
    const double top = std::max(0.0, g.size() > 0 ? g(0) : 0.0);
    Index r = 0;
    while (r < g.size() && g(r) > 1e-13 * top) ++r;

    const Matrix ur = h.data.transpose() * v.leftCols(r) * g.head(r).cwiseSqrt().cwiseInverse().asDiagonal();
    Eigen::HouseholderQR<Matrix> qr(ur);
    Matrix q = qr.householderQ();
    for (Index i = 0; i < r; ++i)
        if (qr.matrixQR()(i, i) < 0) q.col(i) = -q.col(i);

    SpectralDecomposition d;
    d.eigenvalues = Vector::Zero(p);
    d.eigenvalues.head(r) = g.head(r);
    d.eigenvectors = std::move(q);
    d.ell = h.ell;
    d.m = h.m;
    return d;
}

inline SpectralDecomposition decompose(const TrajectoryMatrix& h) {
    auto d = h.data.rows() < h.data.cols() ? gram_decompose(h) : decompose(lag_covariance(h), h.ell, h.m);
    const Matrix yu = h.data * d.eigenvectors;
    d.right_vectors = Matrix::Zero(yu.rows(), yu.cols());
    for (Index i = 0; i < d.size(); ++i)
        if (d.eigenvalues(i) > 0) d.right_vectors.col(i) = yu.col(i) / std::sqrt(d.eigenvalues(i));
    return d;
}

struct SubspaceModel {
    Matrix basis;  // U_k
    Index k = 0;
    Index ell = 0;
    Index m = 0;
    Vector train_eigenvalues;
};

inline SubspaceModel build_subspace(const SpectralDecomposition& d, Index k) {
    const Index p = d.size();
    if (k < 1 || k > p) throw ParameterError("k must satisfy 1 <= k <= ell*m");
    return SubspaceModel{d.eigenvectors.leftCols(k), k, d.ell, d.m, d.eigenvalues};
}

inline double deviation_score(const SubspaceModel& model, const Vector& z) {
    if (z.size() != model.basis.rows()) throw ShapeError("window length does not match ell*m");
    return (z - model.basis * (model.basis.transpose() * z)).norm();
}

// Component ids are 1-based, as in the spectral ordering.
inline Matrix reconstruct_components(const TrajectoryMatrix& h, const SpectralDecomposition& d,
                                     const std::vector<Index>& ids) {
    const Index p = d.size();
    if (h.data.cols() != p) throw ShapeError("decomposition does not match the trajectory matrix");
    if (ids.empty()) return Matrix::Zero(h.n, h.m);
    Matrix u(p, static_cast<Index>(ids.size()));
    for (std::size_t c = 0; c < ids.size(); ++c) {
        if (ids[c] < 1 || ids[c] > p) throw ParameterError("component id out of range");
        u.col(static_cast<Index>(c)) = d.eigenvectors.col(ids[c] - 1);
    }
    return hankelize((h.data * u) * u.transpose(), h.ell, h.m, h.n);
}

struct WCorrMatrix {
    Matrix rho;
    Vector weights;
};

inline Vector wcorr_weights(Index n, Index ell) {
    Vector w(n);
    for (Index t = 1; t <= n; ++t) w(t - 1) = static_cast<double>(std::min({t, ell, n - ell}));
    return w;
}

// Weighted correlation of two n x m series; 0 when either has zero w-norm.
inline double w_correlation(const Matrix& a, const Matrix& b, const Vector& w) {
    if (a.rows() != b.rows() || a.cols() != b.cols() || w.size() != a.rows())
        throw ShapeError("w_correlation: shapes differ");
    const auto ip = [&](const Matrix& x, const Matrix& y) {
        return (w.asDiagonal() * x.cwiseProduct(y)).sum();
    };
    const double na = ip(a, a), nb = ip(b, b);
    if (na <= 0 || nb <= 0) return 0.0;
    return ip(a, b) / std::sqrt(na * nb);
}

inline WCorrMatrix wcorrelation(const TrajectoryMatrix& h, const SpectralDecomposition& d) {
    const Index p = d.size();
    if (h.data.cols() != p) throw ShapeError("decomposition does not match the trajectory matrix");
    WCorrMatrix out{Matrix::Zero(p, p), wcorr_weights(h.n, h.ell)};
    const Vector sw = out.weights.cwiseSqrt();
    const Matrix yu = h.data * d.eigenvectors;
    Matrix f(h.n * h.m, p);
    for (Index i = 0; i < p; ++i) {
        const Matrix comp = hankelize(yu.col(i) * d.eigenvectors.col(i).transpose(), h.ell, h.m, h.n);
        for (Index q = 0; q < h.m; ++q) f.col(i).segment(q * h.n, h.n) = comp.col(q).cwiseProduct(sw);
    }
    const Matrix g = f.transpose() * f;
    const double tiny = 1e-28 * std::max(g.diagonal().sum(), 1e-300);
    for (Index i = 0; i < p; ++i) {
        if (g(i, i) <= tiny) continue;
        for (Index j = 0; j < p; ++j) {
            if (g(j, j) <= tiny) continue;
            out.rho(i, j) = g(i, j) / std::sqrt(g(i, i) * g(j, j));
        }
    }
    return out;
}

struct GroupStrategy {
    enum class Kind { leading_block, fixed };
    Kind kind = Kind::leading_block;
    Index k = 1;
    double cutoff = 0.3;

    static GroupStrategy leading_block(double cutoff = 0.3) { return {Kind::leading_block, 1, cutoff}; }
    static GroupStrategy fixed(Index k) { return {Kind::fixed, k, 0.3}; }
};

struct GroupSelection {
    std::vector<Index> ids;
    bool low_separability = false;
};

inline std::vector<Index> prefix_ids(Index k) {
    std::vector<Index> ids(static_cast<std::size_t>(k));
    for (Index i = 0; i < k; ++i) ids[i] = i + 1;
    return ids;
}

// Smallest prefix {1..k} whose w-correlation with the rest stays below the cutoff.
inline GroupSelection select_group(const WCorrMatrix& w, const GroupStrategy& s) {
    const Index p = w.rho.rows();
    if (s.kind == GroupStrategy::Kind::fixed) {
        if (s.k < 1 || s.k > p) throw ParameterError("fixed group size out of range");
        return {prefix_ids(s.k), false};
    }
    for (Index k = 1; k < p; ++k) {
        const double cross = w.rho.block(0, k, k, p - k).cwiseAbs().maxCoeff();
        if (cross < s.cutoff) return {prefix_ids(k), false};
    }
    return {prefix_ids(1), p > 1};
}

enum class QBetaVariant {
    standard,  // upper-beta normal quantile inside the bracket
    literal,   // the bare (1 - beta) factor
};

inline double q_beta_threshold(const Vector& tail, double beta, QBetaVariant variant = QBetaVariant::standard,
                               double reference = -1.0) {
    if (!(beta > 0.0 && beta < 1.0)) throw ParameterError("beta must lie in (0,1)");
    if (tail.size() == 0) return 0.0;
    const double ref = reference > 0 ? reference : std::max(tail.maxCoeff(), 0.0);
    if (tail.minCoeff() < -1e-10 * std::max(ref, 1.0))
        throw ParameterError("tail eigenvalues must be non-negative");
    double p1 = 0, p2 = 0, p3 = 0;
    for (Index i = 0; i < tail.size(); ++i) {
        const double l = tail(i) < 1e-12 * ref ? 0.0 : tail(i);
        p1 += l;
        p2 += l * l;
        p3 += l * l * l;
    }
    if (p1 <= 0) return 0.0;
    const double h = 1.0 - 2.0 * p1 * p3 / (3.0 * p2 * p2);
    const double c = variant == QBetaVariant::standard ? stats::normal_upper_quantile(beta) : 1.0 - beta;
    const double base = c * std::sqrt(2.0 * p2 * h * h) / p1 + 1.0 + p2 * h * (h - 1.0) / (p1 * p1);
    if (h <= 0 || base <= 0) {
        // Box's scaled chi-square with matched first two moments.
        return (p2 / p1) * stats::chi2_upper_quantile(p1 * p1 / p2, beta);
    }
    return p1 * std::pow(base, 1.0 / h);
}

enum class ThresholdMode { q_beta, fixed };

struct DetectorConfig {
    Index ell = 1;
    std::optional<Index> k;  // empty = auto via leading_block
    double beta = 1e-3;
    Index train_bins = 0;
    ThresholdMode threshold_mode = ThresholdMode::q_beta;
    double fixed_threshold = 0.0;
    bool fit_whole_series = false;
    bool standardize = false;
    QBetaVariant qbeta_variant = QBetaVariant::standard;
    double separability_cutoff = 0.3;
};

inline void validate(const DetectorConfig& c) {
    if (c.ell < 1) throw ParameterError("ell must be >= 1");
    if (!(c.beta > 0.0 && c.beta < 1.0)) throw ParameterError("beta must lie in (0,1)");
    if (c.train_bins < c.ell + 1) throw ParameterError("train_bins must be >= ell + 1");
    if (c.k && *c.k < 1) throw ParameterError("k must be >= 1");
}

struct MssaModel {
    SubspaceModel subspace;
    Vector means;
    Vector scales;
    double q_beta = 0.0;
    double threshold = 0.0;  // in score units (sqrt of q_beta in q_beta mode)
    bool low_separability = false;
    Index train_windows = 0;
};

inline MssaModel fit_mssa(const FlowSeries& s, const DetectorConfig& c) {
    validate(s);
    validate(c);
    const Index n = s.bins();
    if (!c.fit_whole_series && n < c.train_bins + c.ell)
        throw ParameterError("series shorter than train_bins + ell");
    const Index rows = c.fit_whole_series ? n : c.train_bins;
    if (rows <= c.ell) throw ParameterError("training span must exceed ell");

    MssaModel model;
    const auto train = s.values.topRows(rows);
    model.means = train.colwise().mean().transpose();
    model.scales = Vector::Ones(s.features());
    if (c.standardize) {
        for (Index q = 0; q < s.features(); ++q) {
            const double sd = std::sqrt((train.col(q).array() - model.means(q)).square().sum() /
                                        static_cast<double>(rows - 1));
            if (sd > 0) model.scales(q) = sd;
        }
    }
    Matrix z = train;
    z.rowwise() -= model.means.transpose();
    z.array().rowwise() /= model.scales.transpose().array();

    const auto h = embed(z, c.ell);
    model.train_windows = h.windows();
    auto d = decompose(Matrix(lag_covariance(h) / static_cast<double>(h.windows())), h.ell, h.m);
    const Index p = d.size();

    Index k = 0;
    if (c.k) {
        k = *c.k;
    } else {
        const auto sel = select_group(wcorrelation(h, d), GroupStrategy::leading_block(c.separability_cutoff));
        k = static_cast<Index>(sel.ids.size());
        model.low_separability = sel.low_separability;
    }
    model.subspace = build_subspace(d, k);

    if (c.threshold_mode == ThresholdMode::q_beta) {
        model.q_beta = q_beta_threshold(d.eigenvalues.tail(p - k), c.beta, c.qbeta_variant, d.eigenvalues(0));
        model.threshold = std::sqrt(model.q_beta);
    } else {
        model.threshold = c.fixed_threshold;
    }
    return model;
}

// Per-bin scores; the window starting at t is attributed to bin t + ell - 1.
inline Vector mssa_scores(const FlowSeries& s, const MssaModel& model) {
    const Index ell = model.subspace.ell;
    if (s.features() != model.subspace.m) throw ShapeError("feature count does not match the model");
    Vector out = Vector::Zero(s.bins());
    if (model.subspace.k == model.subspace.basis.rows()) return out;
    Matrix z = s.values;
    z.rowwise() -= model.means.transpose();
    z.array().rowwise() /= model.scales.transpose().array();
    const auto h = embed(z, ell);
    const Matrix& u = model.subspace.basis;
    const Matrix r = h.data - (h.data * u) * u.transpose();
    out.tail(h.windows()) = r.rowwise().norm();
    return out;
}

inline DetectionResult detect(const FlowSeries& s, const DetectorConfig& c) {
    const auto model = fit_mssa(s, c);
    return make_result(s, mssa_scores(s, model), model.threshold, "mssa", c.ell - 1);
}

}  // namespace netssa
