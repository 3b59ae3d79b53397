#pragma once

#include "connlatent/classifier.hpp"
#include "connlatent/common.hpp"
#include "connlatent/dataset.hpp"
#include "connlatent/metrics.hpp"
#include "connlatent/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace connlatent {

enum class MetricKind { accuracy, sensitivity, specificity, auc };

inline const char* metric_name(MetricKind m) {
    switch (m) {
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::sensitivity: return "sensitivity";
        case MetricKind::specificity: return "specificity";
        case MetricKind::auc: return "auc";
    }
    return "?";
}

inline double metric_value(const Metrics& m, MetricKind kind) {
    switch (kind) {
        case MetricKind::accuracy: return m.accuracy;
        case MetricKind::sensitivity: return m.sensitivity;
        case MetricKind::specificity: return m.specificity;
        case MetricKind::auc: return m.auc;
    }
    return 0.0;
}

// Fixed train/test feature matrices with labels; the evaluation protocols
// below retrain classifiers on (possibly resampled or relabeled) train data
// and measure on the test side.
struct EvalSplit {
    Matrix x_train;
    std::vector<int> y_train;
    Matrix x_test;
    std::vector<int> y_test;
};

struct BootstrapCI {
    std::string metric;
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    int replicates = 0;
};

struct PermutationResult {
    double observed = 0.0;
    std::vector<double> permuted;
    double p_value = 1.0;
};

// Sites with strictly more than `min_per_class` subjects of each class,
// ascending order.
inline std::vector<int> losocv_sites(const Dataset& d, int min_per_class = 20) {
    std::map<int, std::pair<int, int>> counts;  // site -> (controls, patients)
    for (const auto& rec : d.records) {
        auto& c = counts[rec.site_id];
        (rec.label == 1 ? c.second : c.first) += 1;
    }
    std::vector<int> sites;
    for (const auto& [site, c] : counts)
        if (c.first > min_per_class && c.second > min_per_class) sites.push_back(site);
    return sites;
}

namespace eval_detail {

inline double percentile(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

}  // namespace eval_detail

// Bootstrap over the training set: each replicate resamples train subjects
// with replacement (stratified per class, so both classes survive), refits
// the classifier, re-tunes the threshold on the out-of-bag subjects, and
// evaluates on the fixed test set. CIs are the 2.5/97.5 percentiles.
// `point` carries the caller's point estimates into the report.
inline std::vector<BootstrapCI> bootstrap_ci(const EvalSplit& split, const ClassifierConfig& cfg,
                                             const Metrics& point, int B, std::uint64_t seed,
                                             int threads = 1) {
    if (B < 100) throw ConfigError("bootstrap needs at least 100 replicates");
    const Index n = split.x_train.rows();
    std::vector<std::vector<int>> class_rows(2);
    for (Index i = 0; i < n; ++i) class_rows[static_cast<std::size_t>(split.y_train[static_cast<std::size_t>(i)])]
        .push_back(static_cast<int>(i));
    if (class_rows[0].empty() || class_rows[1].empty())
        throw ConfigError("bootstrap requires both classes in the training set");

    const std::vector<MetricKind> kinds = {MetricKind::accuracy, MetricKind::sensitivity,
                                           MetricKind::specificity, MetricKind::auc};
    Matrix replicate_metrics(B, static_cast<Index>(kinds.size()));

    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t rep) {
        Rng rng(derive_seed(seed, rep));
        for (int attempt = 0;; ++attempt) {
            std::vector<char> drawn(static_cast<std::size_t>(n), 0);
            std::vector<int> rows;
            rows.reserve(static_cast<std::size_t>(n));
            for (const auto& pool : class_rows) {
                for (std::size_t k = 0; k < pool.size(); ++k) {
                    const int r = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
                    rows.push_back(r);
                    drawn[static_cast<std::size_t>(r)] = 1;
                }
            }
            std::vector<int> oob;
            for (Index i = 0; i < n; ++i)
                if (!drawn[static_cast<std::size_t>(i)]) oob.push_back(static_cast<int>(i));
            bool oob_pos = false, oob_neg = false;
            for (int r : oob) (split.y_train[static_cast<std::size_t>(r)] == 1 ? oob_pos : oob_neg) = true;
            if (!(oob_pos && oob_neg)) {
                if (attempt >= 20)
                    throw EvalError("bootstrap replicate " + std::to_string(rep) +
                                    ": out-of-bag set keeps missing a class");
                continue;
            }

            Matrix x_boot(static_cast<Index>(rows.size()), split.x_train.cols());
            std::vector<int> y_boot(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                x_boot.row(static_cast<Index>(i)) = split.x_train.row(rows[i]);
                y_boot[i] = split.y_train[static_cast<std::size_t>(rows[i])];
            }
            Matrix x_oob(static_cast<Index>(oob.size()), split.x_train.cols());
            std::vector<int> y_oob(oob.size());
            for (std::size_t i = 0; i < oob.size(); ++i) {
                x_oob.row(static_cast<Index>(i)) = split.x_train.row(oob[i]);
                y_oob[i] = split.y_train[static_cast<std::size_t>(oob[i])];
            }

            TrainedClassifier model = fit_classifier(cfg, x_boot, y_boot, derive_seed(seed, 70000 + rep), 1);
            model.threshold = tune_threshold(classifier_scores(model, x_oob), y_oob);
            const Vector test_scores = classifier_scores(model, split.x_test);
            const Metrics m = compute_metrics(test_scores, split.y_test, model.threshold);
            for (std::size_t k = 0; k < kinds.size(); ++k)
                replicate_metrics(static_cast<Index>(rep), static_cast<Index>(k)) = metric_value(m, kinds[k]);
            break;
        }
    });

    std::vector<BootstrapCI> out;
    for (std::size_t k = 0; k < kinds.size(); ++k) {
        std::vector<double> column(static_cast<std::size_t>(B));
        for (int r = 0; r < B; ++r) column[static_cast<std::size_t>(r)] = replicate_metrics(r, static_cast<Index>(k));
        BootstrapCI ci;
        ci.metric = metric_name(kinds[k]);
        ci.point = metric_value(point, kinds[k]);
        ci.lower = eval_detail::percentile(column, 0.025);
        ci.upper = eval_detail::percentile(column, 0.975);
        ci.replicates = B;
        out.push_back(ci);
    }
    return out;
}

// Label-permutation significance test. The observed statistic and every
// permuted statistic share one protocol: fit on train, tune the threshold on
// the training scores, evaluate `metric` on test. Each iteration shuffles the
// pooled train+test labels jointly under its own seeded stream.
// p = (1 + #{perm >= observed}) / (N + 1).
inline PermutationResult permutation_test(const EvalSplit& split, const ClassifierConfig& cfg, int N,
                                          std::uint64_t seed, MetricKind metric = MetricKind::accuracy,
                                          int threads = 1) {
    if (N < 1) throw ConfigError("permutation test needs at least 1 iteration");

    const auto evaluate = [&](const std::vector<int>& y_train, const std::vector<int>& y_test,
                              std::uint64_t fit_seed) {
        TrainedClassifier model = fit_classifier(cfg, split.x_train, y_train, fit_seed, 1);
        if (metric != MetricKind::auc)
            model.threshold = tune_threshold(classifier_scores(model, split.x_train), y_train);
        const Vector scores = classifier_scores(model, split.x_test);
        return metric_value(compute_metrics(scores, y_test, model.threshold), metric);
    };

    PermutationResult result;
    result.observed = evaluate(split.y_train, split.y_test, derive_seed(seed, 90001));
    result.permuted.assign(static_cast<std::size_t>(N), 0.0);

    const std::size_t n_train = split.y_train.size();
    std::vector<int> pooled = split.y_train;
    pooled.insert(pooled.end(), split.y_test.begin(), split.y_test.end());

    parallel_for(static_cast<std::size_t>(N), threads, [&](std::size_t iter) {
        Rng rng(derive_seed(seed, 100 + iter));
        for (int attempt = 0;; ++attempt) {
            std::vector<int> shuffled = pooled;
            rng.shuffle(shuffled);
            std::vector<int> y_train(shuffled.begin(), shuffled.begin() + static_cast<long>(n_train));
            std::vector<int> y_test(shuffled.begin() + static_cast<long>(n_train), shuffled.end());
            try {
                result.permuted[iter] = evaluate(y_train, y_test, derive_seed(seed, 91000 + iter));
                break;
            } catch (const Error&) {
                if (attempt >= 20)
                    throw EvalError("permutation iteration " + std::to_string(iter) +
                                    " kept failing (degenerate label draw)");
            }
        }
    });

    long greater_equal = 0;
    for (double v : result.permuted)
        if (v >= result.observed) ++greater_equal;
    result.p_value = static_cast<double>(1 + greater_equal) / static_cast<double>(N + 1);
    return result;
}

}  // namespace connlatent
