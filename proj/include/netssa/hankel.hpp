#pragma once

#include "netssa/timeseries.hpp"

namespace netssa {

// Rows are windows, columns are ell lag copies of feature 1, then of feature 2, ...
struct TrajectoryMatrix {
    Matrix data;
    Index ell = 0;
    Index m = 0;
    Index n = 0;  // length of the series span the windows cover

    Index windows() const { return data.rows(); }
};

// H(t) restricted to `windows` rows (all that fit when negative). t is 1-based.
inline TrajectoryMatrix shifted_hankel(const Matrix& values, Index ell, Index t, Index windows = -1) {
    const Index n = values.rows();
    const Index m = values.cols();
    if (ell < 1 || ell >= n) throw ParameterError("ell must satisfy 1 <= ell < n");
    if (t < 1) throw ParameterError("shift t must be >= 1");
    const Index available = n - ell + 1 - (t - 1);
    if (available < 1) throw ParameterError("shift t too large for the series");
    if (windows < 0) windows = available;
    if (windows < 1 || windows > available)
        throw ParameterError("requested window count does not fit the series");

    TrajectoryMatrix h{Matrix(windows, ell * m), ell, m, windows + ell - 1};
    for (Index q = 0; q < m; ++q)
        for (Index j = 0; j < ell; ++j)
            h.data.col(q * ell + j) = values.col(q).segment(t - 1 + j, windows);
    return h;
}

inline TrajectoryMatrix embed(const Matrix& values, Index ell) { return shifted_hankel(values, ell, 1); }

inline TrajectoryMatrix embed(const FlowSeries& s, Index ell) { return embed(s.values, ell); }

inline TrajectoryMatrix shifted_hankel(const FlowSeries& s, Index ell, Index t) {
    return shifted_hankel(s.values, ell, t);
}

// Anti-diagonal averaging per feature block; returns an n x m matrix.
inline Matrix hankelize(const Matrix& data, Index ell, Index m, Index n) {
    if (ell < 1 || m < 1 || data.cols() != ell * m || n != data.rows() + ell - 1)
        throw ShapeError("hankelize: layout metadata does not match the matrix shape");
    const Index k = data.rows();
    Matrix out = Matrix::Zero(n, m);
    Vector count = Vector::Zero(n);
    for (Index i = 0; i < k; ++i)
        for (Index j = 0; j < ell; ++j) count(i + j) += 1.0;
    for (Index q = 0; q < m; ++q) {
        const auto block = data.middleCols(q * ell, ell);
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < ell; ++j) out(i + j, q) += block(i, j);
        out.col(q).array() /= count.array();
    }
    return out;
}

inline Matrix hankelize(const TrajectoryMatrix& h) { return hankelize(h.data, h.ell, h.m, h.n); }

}  // namespace netssa
