#pragma once

#include "connlatent/common.hpp"
#include "connlatent/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace connlatent {

struct TreeNode {
    int feature = -1;          // -1 marks a leaf
    double split = 0.0;        // go left when value <= split
    int left = -1, right = -1;
    double p_positive = 0.0;   // leaf class-1 fraction

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double leaf_probability(const Matrix& x, Index row) const {
        int node = 0;
        while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(node)];
            node = x(row, nd.feature) <= nd.split ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(node)].p_positive;
    }

    // Majority vote; a tied leaf votes control.
    int vote(const Matrix& x, Index row) const { return leaf_probability(x, row) > 0.5 ? 1 : 0; }
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    int n_trees = 0;
    int max_depth = 0;
    double threshold = 0.5;  // vote-fraction cutoff
    std::uint64_t seed = 0;
};

namespace forest_detail {

inline double gini(double pos, double total) {
    if (total <= 0.0) return 0.0;
    const double p = pos / total;
    return 2.0 * p * (1.0 - p);
}

struct SplitChoice {
    int feature = -1;
    double split = 0.0;
    double decrease = 0.0;
};

// Best Gini-decrease split over `candidates` for the node's samples.
inline SplitChoice best_split(const Matrix& x, const std::vector<int>& y, const std::vector<int>& samples,
                              const std::vector<int>& candidates) {
    const double total = static_cast<double>(samples.size());
    double pos_total = 0;
    for (int s : samples) pos_total += y[static_cast<std::size_t>(s)];
    const double parent = gini(pos_total, total);

    SplitChoice best;
    std::vector<std::pair<double, int>> values(samples.size());
    for (int feature : candidates) {
        for (std::size_t k = 0; k < samples.size(); ++k) {
            const int s = samples[k];
            values[k] = {x(s, feature), y[static_cast<std::size_t>(s)]};
        }
        std::sort(values.begin(), values.end());

        double left_n = 0, left_pos = 0;
        for (std::size_t k = 0; k + 1 < values.size(); ++k) {
            left_n += 1.0;
            left_pos += values[k].second;
            if (values[k].first == values[k + 1].first) continue;
            const double right_n = total - left_n;
            const double right_pos = pos_total - left_pos;
            const double weighted =
                (left_n / total) * gini(left_pos, left_n) + (right_n / total) * gini(right_pos, right_n);
            const double decrease = parent - weighted;
            if (decrease > best.decrease) {
                best.decrease = decrease;
                best.feature = feature;
                best.split = values[k].first + 0.5 * (values[k + 1].first - values[k].first);
            }
        }
    }
    return best;
}

inline DecisionTree grow_tree(const Matrix& x, const std::vector<int>& y, int max_depth, Rng& rng) {
    const Index n = x.rows();
    const int dim = static_cast<int>(x.cols());
    const int mtry = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(dim))));

    std::vector<int> bootstrap(static_cast<std::size_t>(n));
    for (auto& s : bootstrap) s = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));

    DecisionTree tree;
    struct Pending {
        int node;
        std::vector<int> samples;
        int depth;
    };
    std::vector<Pending> stack;
    tree.nodes.emplace_back();
    stack.push_back({0, std::move(bootstrap), 0});

    std::vector<int> feature_pool(static_cast<std::size_t>(dim));
    std::iota(feature_pool.begin(), feature_pool.end(), 0);

    while (!stack.empty()) {
        Pending item = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];

        double pos = 0;
        for (int s : item.samples) pos += y[static_cast<std::size_t>(s)];
        node.p_positive = pos / static_cast<double>(item.samples.size());

        const bool pure = pos == 0.0 || pos == static_cast<double>(item.samples.size());
        if (pure || item.depth >= max_depth || item.samples.size() < 2) continue;

        // Draw ceil(sqrt(d)) distinct candidate features.
        std::vector<int> candidates;
        candidates.reserve(static_cast<std::size_t>(mtry));
        for (int k = 0; k < mtry; ++k) {
            const int j = k + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dim - k)));
            std::swap(feature_pool[static_cast<std::size_t>(k)], feature_pool[static_cast<std::size_t>(j)]);
            candidates.push_back(feature_pool[static_cast<std::size_t>(k)]);
        }

        const SplitChoice choice = best_split(x, y, item.samples, candidates);
        if (choice.feature < 0 || choice.decrease <= 0.0) continue;

        std::vector<int> left, right;
        for (int s : item.samples)
            (x(s, choice.feature) <= choice.split ? left : right).push_back(s);
        if (left.empty() || right.empty()) continue;

        const int left_id = static_cast<int>(tree.nodes.size());
        const int right_id = left_id + 1;
        node.feature = choice.feature;
        node.split = choice.split;
        node.left = left_id;
        node.right = right_id;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        stack.push_back({left_id, std::move(left), item.depth + 1});
        stack.push_back({right_id, std::move(right), item.depth + 1});
    }
    return tree;
}

}  // namespace forest_detail

// Bagged Gini trees with sqrt-feature subsampling. Per-tree RNG streams are
// derived from (seed, tree index), so parallel and serial training produce
// identical forests.
inline ForestModel rf_fit(const Matrix& x, const std::vector<int>& y, int n_trees, int max_depth,
                          std::uint64_t seed, int threads = 1) {
    const Index n = x.rows();
    if (static_cast<Index>(y.size()) != n) throw ShapeError("label count does not match sample count");
    if (n_trees < 1) throw ConfigError("forest needs at least one tree");
    if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
    bool has_pos = false, has_neg = false;
    for (int label : y) (label == 1 ? has_pos : has_neg) = true;
    if (!has_pos || !has_neg) throw ConfigError("forest training requires both classes");

    ForestModel model;
    model.n_trees = n_trees;
    model.max_depth = max_depth;
    model.seed = seed;
    model.trees.resize(static_cast<std::size_t>(n_trees));
    parallel_for(static_cast<std::size_t>(n_trees), threads, [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        model.trees[t] = forest_detail::grow_tree(x, y, max_depth, rng);
    });
    return model;
}

// Fraction of trees voting class 1.
inline Vector rf_score(const ForestModel& model, const Matrix& x) {
    Vector scores = Vector::Zero(x.rows());
    for (Index r = 0; r < x.rows(); ++r) {
        int votes = 0;
        for (const auto& tree : model.trees) votes += tree.vote(x, r);
        scores(r) = static_cast<double>(votes) / static_cast<double>(model.trees.size());
    }
    return scores;
}

}  // namespace connlatent
