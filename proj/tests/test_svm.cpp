#include "connlatent/svm.hpp"
#include "connlatent/rng.hpp"

#include <gtest/gtest.h>

using namespace connlatent;

namespace {

struct Toy {
    Matrix x;
    std::vector<int> y;
};

Toy separable_blobs(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    Toy toy;
    toy.x.resize(2 * per_class, 2);
    for (int i = 0; i < per_class; ++i) {
        toy.x(i, 0) = rng.normal() * 0.3 - 2.0;
        toy.x(i, 1) = rng.normal() * 0.3 - 2.0;
        toy.y.push_back(0);
    }
    for (int i = 0; i < per_class; ++i) {
        toy.x(per_class + i, 0) = rng.normal() * 0.3 + 2.0;
        toy.x(per_class + i, 1) = rng.normal() * 0.3 + 2.0;
        toy.y.push_back(1);
    }
    return toy;
}

Toy xor_pattern(int copies) {
    Toy toy;
    toy.x.resize(4 * copies, 2);
    for (int c = 0; c < copies; ++c) {
        toy.x.row(4 * c + 0) << 0, 0;
        toy.x.row(4 * c + 1) << 1, 1;
        toy.x.row(4 * c + 2) << 0, 1;
        toy.x.row(4 * c + 3) << 1, 0;
        toy.y.insert(toy.y.end(), {1, 1, 0, 0});
    }
    return toy;
}

double training_accuracy(const SvmModel& model, const Toy& toy) {
    const Vector scores = svm_decision(model, toy.x);
    int correct = 0;
    for (Index i = 0; i < scores.size(); ++i)
        correct += (scores(i) > 0 ? 1 : 0) == toy.y[static_cast<std::size_t>(i)];
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double kernel_value(const Matrix& x, Index i, Index j, Kernel k, double gamma) {
    if (k == Kernel::linear) return x.row(i).dot(x.row(j));
    return std::exp(-gamma * (x.row(i) - x.row(j)).squaredNorm());
}

// brute-force maximization of the dual over the feasible polytope for a
// 4-point problem with labels (+,+,-,-): a4 = a1 + a2 - a3 closes the
// equality constraint exactly.
double brute_force_dual(const Toy& toy, Kernel kernel, double c_bound, double gamma, int grid) {
    Matrix q(4, 4);
    Vector y(4);
    for (Index i = 0; i < 4; ++i) y(i) = toy.y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
    for (Index i = 0; i < 4; ++i)
        for (Index j = 0; j < 4; ++j) q(i, j) = y(i) * y(j) * kernel_value(toy.x, i, j, kernel, gamma);

    double best = -std::numeric_limits<double>::infinity();
    const double step = c_bound / grid;
    for (int a = 0; a <= grid; ++a)
        for (int b = 0; b <= grid; ++b)
            for (int c = 0; c <= grid; ++c) {
                Vector alpha(4);
                alpha << a * step, b * step, c * step, a * step + b * step - c * step;
                if (alpha(3) < 0.0 || alpha(3) > c_bound) continue;
                const double objective = alpha.sum() - 0.5 * alpha.dot(q * alpha);
                best = std::max(best, objective);
            }
    return best;
}

}  // namespace

TEST(SvmFit, SeparableBlobsReachPerfectTrainingAccuracy) {
    const Toy toy = separable_blobs(20, 5);
    const SvmModel model = svm_fit(toy.x, toy.y, Kernel::linear, 1.0, 0.0);
    EXPECT_DOUBLE_EQ(training_accuracy(model, toy), 1.0);
}

TEST(SvmFit, XorSolvedByRbf) {
    const Toy toy = xor_pattern(10);
    const SvmModel model = svm_fit(toy.x, toy.y, Kernel::rbf, 10.0, 1.0);
    EXPECT_DOUBLE_EQ(training_accuracy(model, toy), 1.0);
}

TEST(SvmFit, DualObjectiveMatchesBruteForceLinear) {
    Toy toy;
    toy.x.resize(4, 2);
    toy.x << 1.0, 0.5, 0.8, 1.2, -0.9, -0.3, -1.1, -1.0;
    toy.y = {1, 1, 0, 0};
    const double c_bound = 1.0;
    const SvmModel model = svm_fit(toy.x, toy.y, Kernel::linear, c_bound, 0.0);
    const double brute = brute_force_dual(toy, Kernel::linear, c_bound, 0.0, 200);
    EXPECT_NEAR(model.dual_objective, brute, 1e-3);
    EXPECT_GE(model.dual_objective, brute - 1e-3);
}

TEST(SvmFit, DualObjectiveMatchesBruteForceRbf) {
    Toy toy;
    toy.x.resize(4, 2);
    toy.x << 0.0, 0.0, 0.4, 0.1, 1.0, 1.0, 0.9, 1.4;
    toy.y = {1, 1, 0, 0};
    const double c_bound = 2.0;
    const SvmModel model = svm_fit(toy.x, toy.y, Kernel::rbf, c_bound, 0.7);
    const double brute = brute_force_dual(toy, Kernel::rbf, c_bound, 0.7, 200);
    EXPECT_NEAR(model.dual_objective, brute, 1e-3);
}

TEST(SvmFit, KktConditionsHoldAtTolerance) {
    const Toy toy = separable_blobs(25, 9);
    const double c_bound = 0.7;
    const SvmModel model = svm_fit(toy.x, toy.y, Kernel::rbf, c_bound, 0.5, 1e-3);
    const Vector scores = svm_decision(model, toy.x);

    // recover alpha per training point from stored support vectors
    Vector alpha = Vector::Zero(toy.x.rows());
    for (Index s = 0; s < model.support_vectors.rows(); ++s) {
        for (Index i = 0; i < toy.x.rows(); ++i) {
            if ((model.support_vectors.row(s) - toy.x.row(i)).norm() == 0.0 && alpha(i) == 0.0) {
                alpha(i) = std::abs(model.dual_coefs(s));
                break;
            }
        }
    }
    const double tol = 2e-3;
    for (Index i = 0; i < toy.x.rows(); ++i) {
        const double margin = (toy.y[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0) * scores(i);
        if (alpha(i) <= 0.0) EXPECT_GE(margin, 1.0 - tol);
        else if (alpha(i) >= c_bound) EXPECT_LE(margin, 1.0 + tol);
        else EXPECT_NEAR(margin, 1.0, tol);
    }
}

TEST(SvmFit, PredictionsInvariantToTrainingOrder) {
    const Toy toy = separable_blobs(15, 13);
    Toy reversed;
    reversed.x = toy.x.colwise().reverse();
    reversed.y.assign(toy.y.rbegin(), toy.y.rend());

    const SvmModel a = svm_fit(toy.x, toy.y, Kernel::rbf, 2.0, 0.3);
    const SvmModel b = svm_fit(reversed.x, reversed.y, Kernel::rbf, 2.0, 0.3);

    Matrix probe(7, 2);
    probe << 0, 0, 1, 1, -2, -2, 2, 2, 0.5, -0.5, -1, 2, 3, -3;
    const Vector sa = svm_decision(a, probe);
    const Vector sb = svm_decision(b, probe);
    for (Index i = 0; i < probe.rows(); ++i) EXPECT_EQ(sa(i) > 0, sb(i) > 0);
}

TEST(SvmFit, SingleClassRejected) {
    Matrix x = Matrix::Random(6, 2);
    EXPECT_THROW(svm_fit(x, {1, 1, 1, 1, 1, 1}, Kernel::linear, 1.0, 0.0), ConfigError);
}

TEST(SvmDecision, WidthMismatchRejected) {
    const Toy toy = separable_blobs(5, 3);
    const SvmModel model = svm_fit(toy.x, toy.y, Kernel::linear, 1.0, 0.0);
    EXPECT_THROW(svm_decision(model, Matrix::Random(2, 3)), ShapeError);
}
