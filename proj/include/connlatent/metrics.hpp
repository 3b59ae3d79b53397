#pragma once

#include "connlatent/common.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace connlatent {

struct Confusion {
    long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct Metrics {
    double accuracy = 0.0;
    double sensitivity = 0.0;  // TP / (TP + FN), positive class = ASD
    double specificity = 0.0;  // TN / (TN + FP)
    double auc = 0.0;
    Confusion confusion;
};

namespace metrics_detail {

inline void check_binary(const std::vector<int>& labels, Index n_scores) {
    if (static_cast<Index>(labels.size()) != n_scores) throw ShapeError("scores and labels differ in length");
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
        (y == 1 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) throw EvalError("metric requires both classes present");
}

}  // namespace metrics_detail

// Mann-Whitney rank AUC; tied scores contribute 1/2.
inline double rank_auc(const Vector& scores, const std::vector<int>& labels) {
    metrics_detail::check_binary(labels, scores.size());
    const Index n = scores.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });

    double rank_sum_pos = 0.0;
    long n_pos = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[static_cast<std::size_t>(order[k])] == 1) {
                rank_sum_pos += avg_rank;
                ++n_pos;
            }
        }
        i = j + 1;
    }
    const long n_neg = static_cast<long>(n) - n_pos;
    const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Confusion and derived metrics at `threshold` (predict 1 when score > threshold),
// plus threshold-free rank AUC.
inline Metrics compute_metrics(const Vector& scores, const std::vector<int>& labels, double threshold) {
    metrics_detail::check_binary(labels, scores.size());
    Metrics m;
    for (Index i = 0; i < scores.size(); ++i) {
        const bool predicted = scores(i) > threshold;
        const bool actual = labels[static_cast<std::size_t>(i)] == 1;
        if (predicted && actual) ++m.confusion.tp;
        else if (predicted && !actual) ++m.confusion.fp;
        else if (!predicted && actual) ++m.confusion.fn;
        else ++m.confusion.tn;
    }
    const auto& c = m.confusion;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.tp + c.fp + c.tn + c.fn);
    m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    m.auc = rank_auc(scores, labels);
    return m;
}

// ROC as (FPR, TPR) points, one per distinct score, from (0,0) to (1,1).
// The trapezoidal integral of these points equals rank_auc.
inline std::vector<std::pair<double, double>> roc_points(const Vector& scores, const std::vector<int>& labels) {
    metrics_detail::check_binary(labels, scores.size());
    const Index n = scores.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) > scores(b); });

    long n_pos = 0;
    for (int y : labels) n_pos += y;
    const long n_neg = static_cast<long>(n) - n_pos;

    std::vector<std::pair<double, double>> points;
    points.emplace_back(0.0, 0.0);
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores(order[j + 1]) == scores(order[i])) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[static_cast<std::size_t>(order[k])] == 1) ++tp;
            else ++fp;
        }
        points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_neg),
                            static_cast<double>(tp) / static_cast<double>(n_pos));
        i = j + 1;
    }
    return points;
}

inline double trapezoid_auc(const std::vector<std::pair<double, double>>& points) {
    double area = 0.0;
    for (std::size_t i = 1; i < points.size(); ++i) {
        area += (points[i].first - points[i - 1].first) * 0.5 * (points[i].second + points[i - 1].second);
    }
    return area;
}

}  // namespace connlatent
