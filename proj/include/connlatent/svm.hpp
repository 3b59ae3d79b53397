#pragma once

#include "connlatent/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace connlatent {

enum class Kernel : std::uint8_t { linear = 0, rbf = 1 };

inline const char* kernel_name(Kernel k) { return k == Kernel::linear ? "linear" : "rbf"; }

// Soft-margin SVM trained by sequential minimal optimization on the dual.
// Decision score f(x) = sum_i alpha_i y_i k(x_i, x) + b.
struct SvmModel {
    Kernel kernel = Kernel::linear;
    double C = 1.0;
    double gamma = 0.1;               // rbf only
    Matrix support_vectors;           // one row per support vector
    Vector dual_coefs;                // alpha_i * y_i
    double intercept = 0.0;
    double threshold = 0.0;
    double dual_objective = 0.0;      // value of the maximized dual at the solution
};

namespace svm_detail {

inline Matrix gram_matrix(const Matrix& a, const Matrix& b, Kernel kernel, double gamma) {
    Matrix dots = a * b.transpose();
    if (kernel == Kernel::linear) return dots;
    const Vector a2 = a.rowwise().squaredNorm();
    const Vector b2 = b.rowwise().squaredNorm();
    Matrix sq = (-2.0 * dots).colwise() + a2;
    sq.rowwise() += b2.transpose();
    return (-gamma * sq.cwiseMax(0.0).array()).exp().matrix();
}

}  // namespace svm_detail

// Maximal-violating-pair SMO. Labels are 0/1 and mapped to -1/+1 internally;
// class 1 (ASD) is the positive class. Stops when the KKT violation gap drops
// below `tol`; a long stall triggers a warning and returns the last iterate.
inline SvmModel svm_fit(const Matrix& x, const std::vector<int>& labels, Kernel kernel, double C,
                        double gamma, double tol = 1e-3) {
    const Index n = x.rows();
    if (static_cast<Index>(labels.size()) != n) throw ShapeError("label count does not match sample count");
    if (C <= 0.0) throw ConfigError("SVM C must be positive");
    if (kernel == Kernel::rbf && gamma <= 0.0) throw ConfigError("SVM gamma must be positive");

    Vector y(n);
    bool has_pos = false, has_neg = false;
    for (Index i = 0; i < n; ++i) {
        y(i) = labels[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
        (y(i) > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) throw ConfigError("SVM training requires both classes");

    const Matrix kmat = svm_detail::gram_matrix(x, x, kernel, gamma);

    // Dual in min form: f(alpha) = 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij.
    Vector alpha = Vector::Zero(n);
    Vector grad = Vector::Constant(n, -1.0);  // grad_i = (Q alpha)_i - 1

    const double tau = 1e-12;
    const std::size_t stall_limit = 10 * static_cast<std::size_t>(n) + 1000;
    const std::size_t hard_cap = std::max<std::size_t>(200000, 200 * static_cast<std::size_t>(n));
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t since_progress = 0;
    bool converged = false;

    for (std::size_t iter = 0; iter < hard_cap; ++iter) {
        // Working pair: most violating indices over the feasible directions.
        int i = -1, j = -1;
        double up_max = -std::numeric_limits<double>::infinity();
        double low_min = std::numeric_limits<double>::infinity();
        for (Index t = 0; t < n; ++t) {
            const double v = -y(t) * grad(t);
            const bool in_up = (y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0);
            const bool in_low = (y(t) < 0 && alpha(t) < C) || (y(t) > 0 && alpha(t) > 0);
            if (in_up && v > up_max) {
                up_max = v;
                i = static_cast<int>(t);
            }
            if (in_low && v < low_min) {
                low_min = v;
                j = static_cast<int>(t);
            }
        }
        const double gap = up_max - low_min;
        if (gap < best_gap - 1e-12) {
            best_gap = gap;
            since_progress = 0;
        } else if (++since_progress > stall_limit) {
            warn("SMO stalled with KKT gap " + std::to_string(gap) + "; returning last iterate");
            break;
        }
        if (gap <= tol) {
            converged = true;
            break;
        }

        const double qii = kmat(i, i), qjj = kmat(j, j), qij = y(i) * y(j) * kmat(i, j);
        const double old_ai = alpha(i), old_aj = alpha(j);
        if (y(i) != y(j)) {
            const double quad = std::max(qii + qjj + 2.0 * qij, tau);
            const double delta = (-grad(i) - grad(j)) / quad;
            const double diff = alpha(i) - alpha(j);
            alpha(i) += delta;
            alpha(j) += delta;
            if (diff > 0 && alpha(j) < 0) {
                alpha(j) = 0;
                alpha(i) = diff;
            } else if (diff <= 0 && alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = -diff;
            }
            if (diff > 0 && alpha(i) > C) {
                alpha(i) = C;
                alpha(j) = C - diff;
            } else if (diff <= 0 && alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = C + diff;
            }
        } else {
            const double quad = std::max(qii + qjj - 2.0 * qij, tau);
            const double delta = (grad(i) - grad(j)) / quad;
            const double sum = alpha(i) + alpha(j);
            alpha(i) -= delta;
            alpha(j) += delta;
            if (sum > C && alpha(i) > C) {
                alpha(i) = C;
                alpha(j) = sum - C;
            } else if (sum <= C && alpha(j) < 0) {
                alpha(j) = 0;
                alpha(i) = sum;
            }
            if (sum > C && alpha(j) > C) {
                alpha(j) = C;
                alpha(i) = sum - C;
            } else if (sum <= C && alpha(i) < 0) {
                alpha(i) = 0;
                alpha(j) = sum;
            }
        }

        const double dai = alpha(i) - old_ai;
        const double daj = alpha(j) - old_aj;
        if (dai != 0.0 || daj != 0.0) {
            grad += (dai * y(i)) * y.cwiseProduct(kmat.col(i)) + (daj * y(j)) * y.cwiseProduct(kmat.col(j));
        }
    }
    if (!converged && since_progress <= stall_limit)
        warn("SMO hit the iteration cap before reaching KKT tolerance");

    // Intercept from free support vectors, midpoint of the bounds otherwise.
    double b;
    {
        double sum = 0.0;
        int free_count = 0;
        for (Index t = 0; t < n; ++t) {
            if (alpha(t) > 0.0 && alpha(t) < C) {
                sum += -y(t) * grad(t);
                ++free_count;
            }
        }
        if (free_count > 0) {
            b = sum / free_count;
        } else {
            double up_max = -std::numeric_limits<double>::infinity();
            double low_min = std::numeric_limits<double>::infinity();
            for (Index t = 0; t < n; ++t) {
                const double v = -y(t) * grad(t);
                const bool in_up = (y(t) > 0 && alpha(t) < C) || (y(t) < 0 && alpha(t) > 0);
                const bool in_low = (y(t) < 0 && alpha(t) < C) || (y(t) > 0 && alpha(t) > 0);
                if (in_up) up_max = std::max(up_max, v);
                if (in_low) low_min = std::min(low_min, v);
            }
            b = (up_max + low_min) / 2.0;
        }
    }

    SvmModel model;
    model.kernel = kernel;
    model.C = C;
    model.gamma = gamma;
    model.intercept = b;
    // dual objective (max form): sum alpha - 1/2 a'Qa = -1/2 (grad - e)'a + e'a
    model.dual_objective = alpha.sum() - 0.5 * alpha.dot(grad + Vector::Ones(n));

    std::vector<Index> sv;
    for (Index t = 0; t < n; ++t)
        if (alpha(t) > 0.0) sv.push_back(t);
    model.support_vectors.resize(static_cast<Index>(sv.size()), x.cols());
    model.dual_coefs.resize(static_cast<Index>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
        model.support_vectors.row(static_cast<Index>(s)) = x.row(sv[s]);
        model.dual_coefs(static_cast<Index>(s)) = alpha(sv[s]) * y(sv[s]);
    }
    return model;
}

inline Vector svm_decision(const SvmModel& model, const Matrix& x) {
    if (x.cols() != model.support_vectors.cols())
        throw ShapeError("feature width " + std::to_string(x.cols()) + " does not match SVM training width " +
                         std::to_string(model.support_vectors.cols()));
    if (model.support_vectors.rows() == 0) return Vector::Constant(x.rows(), model.intercept);
    const Matrix k = svm_detail::gram_matrix(x, model.support_vectors, model.kernel, model.gamma);
    return (k * model.dual_coefs).array() + model.intercept;
}

}  // namespace connlatent
