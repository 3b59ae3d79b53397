#pragma once

#include "connlatent/common.hpp"
#include "connlatent/forest.hpp"
#include "connlatent/metrics.hpp"
#include "connlatent/rng.hpp"
#include "connlatent/svm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace connlatent {

// Per-feature z-scoring with training statistics. Constant features get
// scale 1 so they pass through centered.
struct Standardizer {
    Vector mean;
    Vector scale;

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        Matrix centered = x.rowwise() - s.mean.transpose();
        s.scale = (centered.array().square().colwise().mean()).sqrt();
        for (Index c = 0; c < s.scale.size(); ++c)
            if (s.scale(c) < 1e-12) s.scale(c) = 1.0;
        return s;
    }

    Matrix apply(const Matrix& x) const {
        Matrix out = x.rowwise() - mean.transpose();
        out.array().rowwise() /= scale.transpose().array();
        return out;
    }
};

enum class ModelKind : std::uint8_t { svm = 0, rf = 1 };

inline const char* model_name(ModelKind kind) { return kind == ModelKind::svm ? "svm" : "rf"; }

struct ClassifierConfig {
    ModelKind kind = ModelKind::svm;
    Kernel kernel = Kernel::rbf;
    double C = 1.0;
    double gamma = 0.1;
    int n_trees = 100;
    int max_depth = 5;
};

struct TrainedClassifier {
    ClassifierConfig config;
    SvmModel svm;
    ForestModel forest;
    Standardizer scaler;  // applied for SVM only
    double threshold = 0.0;
};

inline TrainedClassifier fit_classifier(const ClassifierConfig& cfg, const Matrix& x,
                                        const std::vector<int>& y, std::uint64_t seed, int threads = 1) {
    TrainedClassifier model;
    model.config = cfg;
    if (cfg.kind == ModelKind::svm) {
        model.scaler = Standardizer::fit(x);
        model.svm = svm_fit(model.scaler.apply(x), y, cfg.kernel, cfg.C, cfg.gamma);
        model.threshold = 0.0;
    } else {
        model.forest = rf_fit(x, y, cfg.n_trees, cfg.max_depth, seed, threads);
        model.threshold = 0.5;
    }
    return model;
}

inline Vector classifier_scores(const TrainedClassifier& model, const Matrix& x) {
    if (model.config.kind == ModelKind::svm) return svm_decision(model.svm, model.scaler.apply(x));
    return rf_score(model.forest, x);
}

struct Prediction {
    Vector scores;
    std::vector<int> labels;
};

// Labels are 1 when score > threshold.
inline Prediction predict(const TrainedClassifier& model, const Matrix& x) {
    Prediction out;
    out.scores = classifier_scores(model, x);
    out.labels.resize(static_cast<std::size_t>(out.scores.size()));
    for (Index i = 0; i < out.scores.size(); ++i)
        out.labels[static_cast<std::size_t>(i)] = out.scores(i) > model.threshold ? 1 : 0;
    return out;
}

// Decision cutoff maximizing sqrt(sensitivity * specificity). Candidates are
// midpoints between consecutive distinct sorted scores plus one sentinel on
// each side; ties go to the candidate closest to the median score, then to
// the smaller cutoff.
inline double tune_threshold(const Vector& scores, const std::vector<int>& y) {
    metrics_detail::check_binary(y, scores.size());
    const Index n = scores.size();

    std::vector<std::pair<double, int>> sorted(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = {scores(i), y[static_cast<std::size_t>(i)]};
    std::sort(sorted.begin(), sorted.end());

    long n_pos = 0;
    for (const auto& [s, label] : sorted) n_pos += label;
    const long n_neg = static_cast<long>(n) - n_pos;

    const double median = (n % 2 == 1) ? sorted[static_cast<std::size_t>(n / 2)].first
                                       : 0.5 * (sorted[static_cast<std::size_t>(n / 2 - 1)].first +
                                                sorted[static_cast<std::size_t>(n / 2)].first);

    double best_gmean = -1.0;
    double best_threshold = 0.0;
    auto consider = [&](double threshold, long tp, long tn) {
        const double sens = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double spec = static_cast<double>(tn) / static_cast<double>(n_neg);
        const double gmean = std::sqrt(sens * spec);
        if (gmean > best_gmean) {
            best_gmean = gmean;
            best_threshold = threshold;
        } else if (gmean == best_gmean) {
            const double d_new = std::abs(threshold - median);
            const double d_old = std::abs(best_threshold - median);
            if (d_new < d_old || (d_new == d_old && threshold < best_threshold)) best_threshold = threshold;
        }
    };

    // Sweep thresholds upward: samples at or below the cutoff are predicted 0.
    long tp = n_pos, tn = 0;
    consider(sorted.front().first - 1.0, tp, tn);
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1].first == sorted[i].first) ++j;
        for (std::size_t k = i; k <= j; ++k) {
            if (sorted[k].second == 1) --tp;
            else ++tn;
        }
        const double threshold = j + 1 < sorted.size()
                                     ? sorted[j].first + 0.5 * (sorted[j + 1].first - sorted[j].first)
                                     : sorted[j].first + 1.0;
        consider(threshold, tp, tn);
        i = j + 1;
    }
    return best_threshold;
}

struct GridSpec {
    std::vector<double> svm_C = {0.01, 0.1, 1.0, 10.0, 100.0};
    std::vector<double> svm_gamma = {1.0, 0.1, 0.01, 0.001, 0.0001};
    std::vector<Kernel> svm_kernels = {Kernel::linear, Kernel::rbf};
    std::vector<int> rf_n_trees = {10, 50, 100, 500, 1000};
    std::vector<int> rf_max_depth = {1, 3, 5, 10, 20};

    void validate() const {
        if (svm_C.empty() || svm_gamma.empty() || svm_kernels.empty() || rf_n_trees.empty() ||
            rf_max_depth.empty())
            throw ConfigError("grid value lists must be nonempty");
    }
};

struct GridCell {
    ClassifierConfig config;
    std::vector<double> fold_auc;
    double mean_auc = std::numeric_limits<double>::quiet_NaN();
};

struct GridSearchResult {
    std::vector<GridCell> cells;
    int best_svm = -1;
    int best_rf = -1;

    const GridCell& best(ModelKind kind) const {
        const int idx = kind == ModelKind::svm ? best_svm : best_rf;
        if (idx < 0) throw EvalError("grid search selected no cell for this model family");
        return cells[static_cast<std::size_t>(idx)];
    }
};

namespace classifier_detail {

// Stratified fold ids (round-robin within label groups, seeded order).
inline std::vector<int> stratified_folds(const std::vector<int>& y, int k, std::uint64_t seed) {
    std::vector<int> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 21));
    rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return y[static_cast<std::size_t>(a)] < y[static_cast<std::size_t>(b)]; });
    std::vector<int> folds(y.size(), 0);
    int next = 0;
    for (int idx : order) {
        folds[static_cast<std::size_t>(idx)] = next;
        next = (next + 1) % k;
    }
    return folds;
}

// (simpler-first) ordering used to break mean-AUC ties.
inline bool simpler_than(const ClassifierConfig& a, const ClassifierConfig& b) {
    if (a.kind == ModelKind::svm) {
        if (a.C != b.C) return a.C < b.C;
        if (a.kernel != b.kernel) return a.kernel == Kernel::linear;
        if (a.kernel == Kernel::rbf && a.gamma != b.gamma) return a.gamma < b.gamma;
        return false;
    }
    if (a.n_trees != b.n_trees) return a.n_trees < b.n_trees;
    if (a.max_depth != b.max_depth) return a.max_depth < b.max_depth;
    return false;
}

}  // namespace classifier_detail

// Stratified k-fold grid search selecting by mean fold AUC, independently for
// the SVM and forest families. Failed cells get NaN and are skipped. Ties go
// to the simpler model (smaller C, linear kernel, smaller gamma; fewer trees,
// smaller depth).
inline GridSearchResult grid_search(const Matrix& x, const std::vector<int>& y, const GridSpec& grid,
                                    int k, std::uint64_t seed, int threads = 1) {
    grid.validate();
    if (k < 2) throw ConfigError("grid search needs at least 2 folds");
    if (static_cast<Index>(y.size()) != x.rows()) throw ShapeError("label count does not match sample count");

    GridSearchResult result;
    for (double c : grid.svm_C) {
        for (Kernel kernel : grid.svm_kernels) {
            if (kernel == Kernel::linear) {
                GridCell cell;
                cell.config = {ModelKind::svm, kernel, c, 0.0, 0, 0};
                result.cells.push_back(cell);
            } else {
                for (double gamma : grid.svm_gamma) {
                    GridCell cell;
                    cell.config = {ModelKind::svm, kernel, c, gamma, 0, 0};
                    result.cells.push_back(cell);
                }
            }
        }
    }
    for (int trees : grid.rf_n_trees) {
        for (int depth : grid.rf_max_depth) {
            GridCell cell;
            cell.config = {ModelKind::rf, Kernel::linear, 0.0, 0.0, trees, depth};
            result.cells.push_back(cell);
        }
    }

    const std::vector<int> folds = classifier_detail::stratified_folds(y, k, seed);
    struct Unit {
        std::size_t cell;
        int fold;
    };
    std::vector<Unit> units;
    for (std::size_t cidx = 0; cidx < result.cells.size(); ++cidx) {
        result.cells[cidx].fold_auc.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
        for (int f = 0; f < k; ++f) units.push_back({cidx, f});
    }

    parallel_for(units.size(), threads, [&](std::size_t u) {
        const auto [cidx, fold] = units[u];
        const ClassifierConfig& cfg = result.cells[cidx].config;
        std::vector<int> train_rows, val_rows;
        for (std::size_t i = 0; i < folds.size(); ++i)
            (folds[i] == fold ? val_rows : train_rows).push_back(static_cast<int>(i));

        Matrix x_train(static_cast<Index>(train_rows.size()), x.cols());
        Matrix x_val(static_cast<Index>(val_rows.size()), x.cols());
        std::vector<int> y_train, y_val;
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            x_train.row(static_cast<Index>(i)) = x.row(train_rows[i]);
            y_train.push_back(y[static_cast<std::size_t>(train_rows[i])]);
        }
        for (std::size_t i = 0; i < val_rows.size(); ++i) {
            x_val.row(static_cast<Index>(i)) = x.row(val_rows[i]);
            y_val.push_back(y[static_cast<std::size_t>(val_rows[i])]);
        }

        try {
            const TrainedClassifier model =
                fit_classifier(cfg, x_train, y_train, derive_seed(seed, 1000 + u), 1);
            const Vector scores = classifier_scores(model, x_val);
            result.cells[cidx].fold_auc[static_cast<std::size_t>(fold)] = rank_auc(scores, y_val);
        } catch (const Error&) {
            // cell stays NaN for this fold
        }
    });

    for (auto& cell : result.cells) {
        double sum = 0.0;
        bool ok = true;
        for (double a : cell.fold_auc) {
            if (std::isnan(a)) ok = false;
            else sum += a;
        }
        cell.mean_auc = ok ? sum / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN();
    }

    auto pick_best = [&](ModelKind kind) {
        int best = -1;
        for (std::size_t i = 0; i < result.cells.size(); ++i) {
            const auto& cell = result.cells[i];
            if (cell.config.kind != kind || std::isnan(cell.mean_auc)) continue;
            if (best < 0) {
                best = static_cast<int>(i);
                continue;
            }
            const auto& incumbent = result.cells[static_cast<std::size_t>(best)];
            if (cell.mean_auc > incumbent.mean_auc ||
                (cell.mean_auc == incumbent.mean_auc &&
                 classifier_detail::simpler_than(cell.config, incumbent.config)))
                best = static_cast<int>(i);
        }
        return best;
    };
    result.best_svm = pick_best(ModelKind::svm);
    result.best_rf = pick_best(ModelKind::rf);
    return result;
}

// Out-of-fold scores for a fixed configuration, using the same stratified
// folds as grid_search under the same seed. Used to tune the decision
// threshold on pooled out-of-fold predictions.
inline Vector cross_val_scores(const Matrix& x, const std::vector<int>& y, const ClassifierConfig& cfg,
                               int k, std::uint64_t seed, int threads = 1) {
    if (k < 2) throw ConfigError("cross-validation needs at least 2 folds");
    const std::vector<int> folds = classifier_detail::stratified_folds(y, k, seed);
    Vector scores(static_cast<Index>(y.size()));
    parallel_for(static_cast<std::size_t>(k), threads, [&](std::size_t fold) {
        std::vector<int> train_rows, val_rows;
        for (std::size_t i = 0; i < folds.size(); ++i)
            (folds[i] == static_cast<int>(fold) ? val_rows : train_rows).push_back(static_cast<int>(i));
        Matrix x_train(static_cast<Index>(train_rows.size()), x.cols());
        std::vector<int> y_train;
        for (std::size_t i = 0; i < train_rows.size(); ++i) {
            x_train.row(static_cast<Index>(i)) = x.row(train_rows[i]);
            y_train.push_back(y[static_cast<std::size_t>(train_rows[i])]);
        }
        Matrix x_val(static_cast<Index>(val_rows.size()), x.cols());
        for (std::size_t i = 0; i < val_rows.size(); ++i) x_val.row(static_cast<Index>(i)) = x.row(val_rows[i]);

        const TrainedClassifier model = fit_classifier(cfg, x_train, y_train, derive_seed(seed, 2000 + fold), 1);
        const Vector val_scores = classifier_scores(model, x_val);
        for (std::size_t i = 0; i < val_rows.size(); ++i) scores(val_rows[i]) = val_scores(static_cast<Index>(i));
    });
    return scores;
}

}  // namespace connlatent
