#pragma once

#include <Eigen/SVD>
#include <complex>
#include <cstdint>
#include <random>

#include "netssa/mssa.hpp"

namespace netssa {

struct LinearDynamicalSystem {
    Matrix A;  // n x n
    Matrix C;  // m x n
    Matrix Q;  // process-noise covariance
    Matrix R;  // measurement-noise covariance
    Vector x0;
};

struct LdsEstimate {
    Matrix A_k;
    Matrix C_k;
    Matrix P_k;  // (ell*m) x k, lag-major rows
    Matrix Q_k;  // k x n'
    Vector singular_values;
    Index k = 0;
    Index ell = 0;
    Index m = 0;

    Eigen::VectorXcd poles() const { return Eigen::EigenSolver<Matrix>(A_k, false).eigenvalues(); }
};

namespace detail {

// Factor F with F F^T = S for a PSD covariance (zero allowed).
inline Matrix psd_sqrt(const Matrix& s) {
    if (s.size() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline Matrix pinv(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double tol = std::numeric_limits<double>::epsilon() * std::max(a.rows(), a.cols()) *
                       (s.size() ? s(0) : 0.0);
    Vector inv = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Lags-as-rows Hankel matrix: rows j*m..j*m+m-1 hold y(t0+j+col).
inline Matrix lag_rows_hankel(const Matrix& y, Index ell, Index t0, Index cols) {
    const Index m = y.cols();
    Matrix h(ell * m, cols);
    for (Index j = 0; j < ell; ++j)
        for (Index q = 0; q < m; ++q) h.row(j * m + q) = y.col(q).segment(t0 + j, cols).transpose();
    return h;
}

}  // namespace detail

inline FlowSeries simulate_lds(const LinearDynamicalSystem& sys, Index n_steps, std::uint64_t seed) {
    if (n_steps < 2) throw ParameterError("n_steps must be >= 2");
    const Index ns = sys.A.rows();
    const Index m = sys.C.rows();
    if (sys.A.cols() != ns || sys.C.cols() != ns || sys.x0.size() != ns)
        throw ShapeError("LDS dimensions are inconsistent");
    const Matrix fq = sys.Q.size() ? detail::psd_sqrt(sys.Q) : Matrix::Zero(ns, ns);
    const Matrix fr = sys.R.size() ? detail::psd_sqrt(sys.R) : Matrix::Zero(m, m);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    auto draw = [&](Index d) {
        Vector v(d);
        for (Index i = 0; i < d; ++i) v(i) = gauss(rng);
        return v;
    };
    Matrix y(n_steps, m);
    Vector x = sys.x0;
    for (Index t = 0; t < n_steps; ++t) {
        y.row(t) = (sys.C * x + fr * draw(m)).transpose();
        x = sys.A * x + fq * draw(ns);
    }
    return make_series(std::move(y), 1);
}

inline LdsEstimate estimate_lds(const FlowSeries& s, Index ell, Index k) {
    validate(s);
    const Index n = s.bins();
    const Index m = s.features();
    if (ell < 1 || ell + 1 > n - 1) throw ParameterError("ell too large for H(1) and H(2)");
    const Index cols = n - ell;  // H(2) needs one more sample than H(1)
    const Matrix h1 = detail::lag_rows_hankel(s.values, ell, 0, cols);
    const Matrix h2 = detail::lag_rows_hankel(s.values, ell, 1, cols);

    Eigen::BDCSVD<Matrix> svd(h1, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double tol = std::numeric_limits<double>::epsilon() * std::max(h1.rows(), h1.cols()) *
                       (sv.size() ? sv(0) : 0.0);
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i) rank += sv(i) > tol ? 1 : 0;
    if (k < 1 || k > rank)
        throw RankError("model order k=" + std::to_string(k) + " exceeds numerical rank " +
                        std::to_string(rank) + " of H(1)");

    LdsEstimate e;
    e.k = k;
    e.ell = ell;
    e.m = m;
    e.singular_values = sv;
    const Vector sig = sv.head(k).cwiseSqrt();
    e.P_k = svd.matrixU().leftCols(k) * sig.asDiagonal();
    e.Q_k = sig.asDiagonal() * svd.matrixV().leftCols(k).transpose();
    e.A_k = detail::pinv(e.P_k) * h2 * detail::pinv(e.Q_k);
    e.C_k = e.P_k.topRows(m);
    return e;
}

// States from the series' own state-sequence factor pinv(P_k) H(1), which is Q_k on
// the estimation series. Past the last full window they are propagated by A_k.
inline Matrix lds_states(const LdsEstimate& e, const Matrix& y) {
    const Index n = y.rows();
    Matrix x(e.k, n);
    const Index h = std::max<Index>(0, n - e.ell + 1);
    if (h > 0) x.leftCols(h) = detail::pinv(e.P_k) * detail::lag_rows_hankel(y, e.ell, 0, h);
    for (Index t = std::max<Index>(h, 1); t < n; ++t) x.col(t) = e.A_k * x.col(t - 1);
    if (h == 0) x.col(0).setZero();
    return x;
}

struct LdsThreshold {
    ThresholdMode mode = ThresholdMode::q_beta;
    double beta = 1e-3;
    double fixed_value = 0.0;
};

inline DetectionResult lds_residual(const FlowSeries& s, const LdsEstimate& e, const LdsThreshold& thr = {}) {
    validate(s);
    if (s.features() != e.m) throw ShapeError("estimate feature count does not match the series");
    const Index n = s.bins();
    const Matrix yhat = e.C_k * lds_states(e, s.values);
    const Matrix r = s.values.transpose() - yhat;
    Vector scores = r.colwise().norm().transpose();

    double threshold = thr.fixed_value;
    if (thr.mode == ThresholdMode::q_beta) {
        const Index h = std::max<Index>(1, n - e.ell + 1);
        const Matrix rh = r.leftCols(h);
        const Matrix cov = rh * rh.transpose() / static_cast<double>(h);
        Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
        const Vector lam = es.eigenvalues().reverse().cwiseMax(0.0);
        threshold = std::sqrt(q_beta_threshold(lam, thr.beta));
    }
    return make_result(s, std::move(scores), threshold, "lds");
}

}  // namespace netssa
