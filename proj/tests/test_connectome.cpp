#include "connlatent/connectome.hpp"
#include "connlatent/rng.hpp"

#include <gtest/gtest.h>

using namespace connlatent;

namespace {

RoiTimeSeries series_from_columns(const std::vector<std::vector<double>>& cols) {
    RoiTimeSeries ts;
    ts.values.resize(static_cast<Index>(cols[0].size()), static_cast<Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < cols[c].size(); ++r)
            ts.values(static_cast<Index>(r), static_cast<Index>(c)) = cols[c][r];
    return ts;
}

}  // namespace

TEST(Pearson, IdenticalSeriesCorrelateAtOne) {
    const auto c = pearson_matrix(series_from_columns({{1, 2, 3}, {1, 2, 3}}));
    EXPECT_DOUBLE_EQ(c.values(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(c.values(0, 0), 1.0);
}

TEST(Pearson, NegatedSeriesCorrelateAtMinusOne) {
    const auto c = pearson_matrix(series_from_columns({{1, 2, 3}, {3, 2, 1}}));
    EXPECT_DOUBLE_EQ(c.values(1, 0), -1.0);
}

TEST(Pearson, HandComputedHalf) {
    // x=[1,2,3], y=[1,3,2]: sum of deviation products 1, both squared sums 2.
    const auto c = pearson_matrix(series_from_columns({{1, 2, 3}, {1, 3, 2}}));
    EXPECT_NEAR(c.values(0, 1), 0.5, 1e-15);
}

TEST(Pearson, ZeroVarianceColumnGivesZeroAndWarns) {
    std::vector<std::string> captured;
    auto previous = warnings::handler();
    warnings::handler() = [&](const std::string& msg) { captured.push_back(msg); };
    const auto c = pearson_matrix(series_from_columns({{2, 2, 2}, {1, 3, 2}}));
    warnings::handler() = previous;
    EXPECT_DOUBLE_EQ(c.values(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(c.values(0, 0), 1.0);
    ASSERT_FALSE(captured.empty());
    EXPECT_NE(captured[0].find("column 0"), std::string::npos);
}

TEST(Pearson, InvariantUnderPositiveAffineTransforms) {
    Rng rng(31);
    RoiTimeSeries ts;
    ts.values.resize(40, 6);
    for (Index r = 0; r < 40; ++r)
        for (Index c = 0; c < 6; ++c) ts.values(r, c) = rng.normal();
    const auto base = pearson_matrix(ts);

    RoiTimeSeries scaled = ts;
    for (Index c = 0; c < 6; ++c)
        scaled.values.col(c) = (2.0 + static_cast<double>(c)) * ts.values.col(c).array() + (c - 3.0);
    const auto transformed = pearson_matrix(scaled);
    EXPECT_LT((base.values - transformed.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pearson, BoundedByOne) {
    Rng rng(77);
    RoiTimeSeries ts;
    ts.values.resize(11, 9);
    for (Index r = 0; r < ts.values.rows(); ++r)
        for (Index c = 0; c < ts.values.cols(); ++c) ts.values(r, c) = rng.normal();
    const auto corr = pearson_matrix(ts);
    EXPECT_LE(corr.values.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
}

TEST(Pearson, RejectsShortOrNonFiniteSeries) {
    EXPECT_THROW(pearson_matrix(series_from_columns({{1, 2}, {3, 4}})), ShapeError);
    auto ts = series_from_columns({{1, 2, 3}, {4, 5, 6}});
    ts.values(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(pearson_matrix(ts), DataError);
}

TEST(Vectorize, PaperDimensionCounts) {
    EXPECT_EQ(feature_vector_length(264), 34980);
    EXPECT_EQ(feature_vector_length(249), 31125);
}

TEST(Vectorize, SmallestNontrivialCase) {
    ConnectivityMatrix c;
    c.values.resize(2, 2);
    c.values << 1.0, 0.37, 0.37, 1.0;
    const Vector v = vectorize(c);
    ASSERT_EQ(v.size(), 3);
    EXPECT_DOUBLE_EQ(v(0), 1.0);
    EXPECT_DOUBLE_EQ(v(1), 0.37);
    EXPECT_DOUBLE_EQ(v(2), 1.0);
}

TEST(Devectorize, ExplicitIndexPlacement) {
    Vector v(6);
    v << 1, 0.2, 1, 0.3, -0.1, 1;
    const auto c = devectorize(v, 3);
    EXPECT_DOUBLE_EQ(c.values(1, 0), 0.2);
    EXPECT_DOUBLE_EQ(c.values(2, 0), 0.3);
    EXPECT_DOUBLE_EQ(c.values(2, 1), -0.1);
    EXPECT_DOUBLE_EQ(c.values(0, 1), 0.2);

    // brute-force index walk agrees
    Index k = 0;
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j <= i; ++j) EXPECT_DOUBLE_EQ(c.values(i, j), v(k++));
}

TEST(Devectorize, LengthMismatchIsShapeError) {
    EXPECT_THROW(devectorize(Vector::Zero(7), 3), ShapeError);
}

TEST(Devectorize, RoundTripIsExactIdentity) {
    Rng rng(5);
    ConnectivityMatrix c;
    c.values.resize(5, 5);
    for (Index i = 0; i < 5; ++i) {
        c.values(i, i) = 1.0;
        for (Index j = 0; j < i; ++j) {
            const double r = rng.uniform(-1.0, 1.0);
            c.values(i, j) = r;
            c.values(j, i) = r;
        }
    }
    const auto back = devectorize(vectorize(c), 5);
    EXPECT_TRUE((back.values.array() == c.values.array()).all());

    Vector v(10);
    for (Index i = 0; i < 10; ++i) v(i) = rng.uniform(-1.0, 1.0);
    EXPECT_TRUE((vectorize(devectorize(v, 4)).array() == v.array()).all());
}
