#include "connlatent/classifier.hpp"
#include "connlatent/dataset.hpp"

#include <gtest/gtest.h>

using namespace connlatent;

namespace {

Vector to_vector(std::initializer_list<double> values) {
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (double x : values) v(i++) = x;
    return v;
}

// independent enumeration of all candidate cuts with the documented tie rule
double oracle_threshold(const Vector& scores, const std::vector<int>& y, double* best_gmean_out = nullptr) {
    std::vector<double> unique(scores.data(), scores.data() + scores.size());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

    std::vector<double> candidates;
    candidates.push_back(unique.front() - 1.0);
    for (std::size_t i = 0; i + 1 < unique.size(); ++i)
        candidates.push_back(unique[i] + 0.5 * (unique[i + 1] - unique[i]));
    candidates.push_back(unique.back() + 1.0);

    std::vector<double> sorted(scores.data(), scores.data() + scores.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median =
        n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);

    double best_g = -1.0, best_t = 0.0;
    for (double t : candidates) {
        long tp = 0, fn = 0, tn = 0, fp = 0;
        for (Index i = 0; i < scores.size(); ++i) {
            const bool predicted = scores(i) > t;
            if (y[static_cast<std::size_t>(i)] == 1) (predicted ? tp : fn)++;
            else (predicted ? fp : tn)++;
        }
        const double g = std::sqrt((static_cast<double>(tp) / (tp + fn)) * (static_cast<double>(tn) / (tn + fp)));
        if (g > best_g) {
            best_g = g;
            best_t = t;
        } else if (g == best_g) {
            const double dn = std::abs(t - median), dk = std::abs(best_t - median);
            if (dn < dk || (dn == dk && t < best_t)) best_t = t;
        }
    }
    if (best_gmean_out) *best_gmean_out = best_g;
    return best_t;
}

double gmean_at(const Vector& scores, const std::vector<int>& y, double threshold) {
    long tp = 0, fn = 0, tn = 0, fp = 0;
    for (Index i = 0; i < scores.size(); ++i) {
        const bool predicted = scores(i) > threshold;
        if (y[static_cast<std::size_t>(i)] == 1) (predicted ? tp : fn)++;
        else (predicted ? fp : tn)++;
    }
    return std::sqrt((static_cast<double>(tp) / (tp + fn)) * (static_cast<double>(tn) / (tn + fp)));
}

}  // namespace

TEST(TuneThreshold, SeparableScoresPickMidpoint) {
    const Vector scores = to_vector({0.1, 0.2, 0.8, 0.9});
    EXPECT_DOUBLE_EQ(tune_threshold(scores, {0, 0, 1, 1}), 0.5);
}

TEST(TuneThreshold, ConstantScoresFallToSentinel) {
    const Vector scores = to_vector({0.5, 0.5, 0.5, 0.5});
    // every cut misclassifies one whole class; the sentinels tie on distance
    // to the median and the lower one wins
    EXPECT_DOUBLE_EQ(tune_threshold(scores, {0, 1, 0, 1}), -0.5);
}

TEST(TuneThreshold, FivePointCaseMatchesExhaustiveEnumeration) {
    const Vector scores = to_vector({1, 2, 3, 4, 5});
    const std::vector<int> y = {0, 1, 0, 1, 1};
    double best_g = 0.0;
    const double oracle = oracle_threshold(scores, y, &best_g);
    const double chosen = tune_threshold(scores, y);
    EXPECT_DOUBLE_EQ(chosen, oracle);
    EXPECT_DOUBLE_EQ(gmean_at(scores, y, chosen), best_g);
}

TEST(TuneThreshold, MatchesOracleOnRandomInstances) {
    Rng rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.uniform_int(48));
        Vector scores(n);
        std::vector<int> y;
        int pos = 0;
        for (int i = 0; i < n; ++i) {
            // coarse grid provokes ties
            scores(i) = std::floor(rng.uniform(0.0, 6.0)) / 3.0;
            y.push_back(rng.bernoulli(0.5) ? 1 : 0);
            pos += y.back();
        }
        if (pos == 0 || pos == n) continue;
        double best_g = 0.0;
        const double oracle = oracle_threshold(scores, y, &best_g);
        const double chosen = tune_threshold(scores, y);
        EXPECT_DOUBLE_EQ(chosen, oracle);
        EXPECT_DOUBLE_EQ(gmean_at(scores, y, chosen), best_g);
    }
}

TEST(TuneThreshold, SingleClassRejected) {
    EXPECT_THROW(tune_threshold(to_vector({1, 2, 3}), {1, 1, 1}), EvalError);
}

TEST(GridSearch, SingleCellIsSelected) {
    const Dataset d = synth_dataset(60, 1, 4, 2, 0.0, 1.5, 31);
    GridSpec grid;
    grid.svm_C = {1.0};
    grid.svm_gamma = {0.1};
    grid.svm_kernels = {Kernel::rbf};
    grid.rf_n_trees = {20};
    grid.rf_max_depth = {3};
    const GridSearchResult result = grid_search(d.features, d.labels(), grid, 3, 7);
    ASSERT_EQ(result.cells.size(), 2u);
    EXPECT_EQ(result.best(ModelKind::svm).config.C, 1.0);
    EXPECT_EQ(result.best(ModelKind::rf).config.n_trees, 20);
}

TEST(GridSearch, TieGoesToSmallerC) {
    // widely separable data: every SVM cell scores AUC 1.0
    const Dataset d = synth_dataset(40, 1, 3, 1, 0.0, 30.0, 17);
    GridSpec grid;
    grid.svm_C = {10.0, 0.1, 1.0};
    grid.svm_gamma = {0.1};
    grid.svm_kernels = {Kernel::linear};
    grid.rf_n_trees = {10};
    grid.rf_max_depth = {1};
    const GridSearchResult result = grid_search(d.features, d.labels(), grid, 2, 3);
    EXPECT_DOUBLE_EQ(result.best(ModelKind::svm).mean_auc, 1.0);
    EXPECT_DOUBLE_EQ(result.best(ModelKind::svm).config.C, 0.1);
}

TEST(GridSearch, PlantedSignalReachesHighCvAuc) {
    const Dataset d = synth_dataset(240, 1, 10, 5, 0.0, 2.0, 99);
    const GridSpec grid;  // full paper grid
    const GridSearchResult result = grid_search(d.features, d.labels(), grid, 5, 21, 2);
    EXPECT_GE(result.best(ModelKind::svm).mean_auc, 0.9);
    // score table covers every (cell, fold) pair
    std::size_t svm_cells = 0, rf_cells = 0;
    for (const auto& cell : result.cells) (cell.config.kind == ModelKind::svm ? svm_cells : rf_cells)++;
    EXPECT_EQ(svm_cells, 5u + 25u);
    EXPECT_EQ(rf_cells, 25u);
}

TEST(GridSearch, RejectsTooFewFolds) {
    const Dataset d = synth_dataset(30, 1, 3, 0, 0.0, 0.0, 3);
    EXPECT_THROW(grid_search(d.features, d.labels(), GridSpec{}, 1, 5), ConfigError);
}

TEST(FitClassifier, SvmStandardizationNeutralizesFeatureScale) {
    Dataset d = synth_dataset(120, 1, 4, 2, 0.0, 2.0, 55);
    ClassifierConfig cfg{ModelKind::svm, Kernel::rbf, 1.0, 0.1, 0, 0};
    const TrainedClassifier base = fit_classifier(cfg, d.features, d.labels(), 1);

    Matrix scaled = d.features;
    scaled.col(0) *= 1000.0;
    const TrainedClassifier rescaled = fit_classifier(cfg, scaled, d.labels(), 1);

    Matrix probe = d.features.topRows(20);
    Matrix probe_scaled = probe;
    probe_scaled.col(0) *= 1000.0;
    const Vector sa = classifier_scores(base, probe);
    const Vector sb = classifier_scores(rescaled, probe_scaled);
    // identical up to the SMO KKT tolerance
    EXPECT_LT((sa - sb).cwiseAbs().maxCoeff(), 5e-3);
    for (Index i = 0; i < sa.size(); ++i) EXPECT_EQ(sa(i) > 0, sb(i) > 0);
}

TEST(Predict, EmptyInputGivesEmptyOutputs) {
    const Dataset d = synth_dataset(40, 1, 3, 1, 0.0, 2.0, 5);
    ClassifierConfig cfg{ModelKind::svm, Kernel::linear, 1.0, 0.1, 0, 0};
    const TrainedClassifier model = fit_classifier(cfg, d.features, d.labels(), 1);
    const Prediction p = predict(model, Matrix(0, 3));
    EXPECT_EQ(p.scores.size(), 0);
    EXPECT_TRUE(p.labels.empty());
}

TEST(Predict, SeparableTrainingPointsRecoverLabels) {
    const Dataset d = synth_dataset(60, 1, 4, 2, 0.0, 20.0, 91);
    ClassifierConfig cfg{ModelKind::svm, Kernel::linear, 1.0, 0.1, 0, 0};
    TrainedClassifier model = fit_classifier(cfg, d.features, d.labels(), 1);
    model.threshold = tune_threshold(classifier_scores(model, d.features), d.labels());
    const Prediction p = predict(model, d.features);
    EXPECT_EQ(p.labels, d.labels());
}

TEST(CrossValScores, DeterministicAndComplete) {
    const Dataset d = synth_dataset(90, 1, 5, 2, 0.0, 1.0, 43);
    ClassifierConfig cfg{ModelKind::svm, Kernel::rbf, 1.0, 0.1, 0, 0};
    const Vector a = cross_val_scores(d.features, d.labels(), cfg, 5, 11, 2);
    const Vector b = cross_val_scores(d.features, d.labels(), cfg, 5, 11, 1);
    EXPECT_TRUE((a.array() == b.array()).all());
    EXPECT_TRUE(a.allFinite());
}
