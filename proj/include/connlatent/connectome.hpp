#pragma once

#include "connlatent/common.hpp"

#include <cmath>
#include <string>

namespace connlatent {

// ROI time series: rows are time points, columns are regions.
struct RoiTimeSeries {
    Matrix values;

    Index time_points() const { return values.rows(); }
    Index roi_count() const { return values.cols(); }

    void validate() const {
        if (values.rows() < 3) throw ShapeError("time series needs at least 3 time points");
        if (!values.allFinite()) throw DataError("time series contains non-finite values");
    }
};

// Symmetric Pearson correlation matrix with unit diagonal.
struct ConnectivityMatrix {
    Matrix values;

    Index roi_count() const { return values.rows(); }
};

inline Index feature_vector_length(Index roi_count) { return roi_count * (roi_count + 1) / 2; }

// Pairwise Pearson correlations of ROI columns. The lower triangle is computed
// and mirrored, the diagonal is forced to 1. A zero-variance column yields 0
// correlations and a warning naming the column.
inline ConnectivityMatrix pearson_matrix(const RoiTimeSeries& ts) {
    ts.validate();
    const Index r = ts.roi_count();

    Matrix centered = ts.values.rowwise() - ts.values.colwise().mean();
    Vector norms(r);
    for (Index j = 0; j < r; ++j) {
        norms(j) = centered.col(j).norm();
        if (norms(j) == 0.0) warn("zero-variance ROI column " + std::to_string(j) + "; correlations set to 0");
    }

    ConnectivityMatrix out;
    out.values = Matrix::Zero(r, r);
    for (Index i = 0; i < r; ++i) {
        out.values(i, i) = 1.0;
        for (Index j = 0; j < i; ++j) {
            const double denom = norms(i) * norms(j);
            const double rho = denom == 0.0 ? 0.0 : centered.col(i).dot(centered.col(j)) / denom;
            out.values(i, j) = rho;
            out.values(j, i) = rho;
        }
    }
    return out;
}

// Row-major expansion of the lower triangle, diagonal included:
// (0,0), (1,0), (1,1), (2,0), ... Length R(R+1)/2.
inline Vector vectorize(const ConnectivityMatrix& c) {
    const Index r = c.roi_count();
    Vector v(feature_vector_length(r));
    Index k = 0;
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j <= i; ++j) v(k++) = c.values(i, j);
    return v;
}

// Inverse of vectorize; exact round trip.
inline ConnectivityMatrix devectorize(const Vector& v, Index roi_count) {
    if (v.size() != feature_vector_length(roi_count)) {
        throw ShapeError("feature vector length " + std::to_string(v.size()) + " does not match " +
                         std::to_string(roi_count) + " ROIs (needs " +
                         std::to_string(feature_vector_length(roi_count)) + ")");
    }
    ConnectivityMatrix c;
    c.values.resize(roi_count, roi_count);
    Index k = 0;
    for (Index i = 0; i < roi_count; ++i) {
        for (Index j = 0; j <= i; ++j) {
            c.values(i, j) = v(k);
            c.values(j, i) = v(k);
            ++k;
        }
    }
    return c;
}

}  // namespace connlatent
