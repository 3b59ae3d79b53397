#pragma once

#include "connlatent/common.hpp"
#include "connlatent/io.hpp"
#include "connlatent/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace connlatent {

enum class Sex : int { male = 0, female = 1 };

struct SubjectRecord {
    std::string subject_id;
    int site_id = 0;
    double age = 0.0;
    Sex sex = Sex::male;
    int label = 0;  // 0 = control, 1 = ASD (positive class)
    bool qc_pass = true;
};

struct Dataset {
    std::vector<SubjectRecord> records;
    Matrix features;  // rows = subjects, columns = connectivity features

    Index size() const { return static_cast<Index>(records.size()); }
    Index feature_dim() const { return features.cols(); }

    std::vector<int> labels() const {
        std::vector<int> y(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) y[i] = records[i].label;
        return y;
    }

    std::vector<int> sites() const {
        std::vector<int> s(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) s[i] = records[i].site_id;
        return s;
    }

    // Covariate matrix in the fixed (age, sex) column order.
    Matrix covariates() const {
        Matrix c(size(), 2);
        for (Index i = 0; i < size(); ++i) {
            c(i, 0) = records[static_cast<std::size_t>(i)].age;
            c(i, 1) = static_cast<double>(records[static_cast<std::size_t>(i)].sex);
        }
        return c;
    }

    Dataset subset(std::span<const int> indices) const {
        Dataset out;
        out.records.reserve(indices.size());
        out.features.resize(static_cast<Index>(indices.size()), features.cols());
        Index r = 0;
        for (int idx : indices) {
            out.records.push_back(records[static_cast<std::size_t>(idx)]);
            out.features.row(r++) = features.row(idx);
        }
        return out;
    }

    void validate() const {
        if (features.rows() != size()) {
            throw ShapeError("feature row count " + std::to_string(features.rows()) +
                             " does not match record count " + std::to_string(size()));
        }
        for (Index i = 0; i < features.rows(); ++i) {
            if (!features.row(i).allFinite()) {
                throw DataError("non-finite feature value for subject '" +
                                records[static_cast<std::size_t>(i)].subject_id + "'");
            }
        }
        for (const auto& rec : records) {
            if (!(rec.age > 0.0 && rec.age < 120.0))
                throw DataError("subject '" + rec.subject_id + "' has implausible age " + std::to_string(rec.age));
            if (rec.site_id < 0)
                throw DataError("subject '" + rec.subject_id + "' has negative site id");
        }
    }
};

struct SplitPlan {
    std::vector<int> train_indices;
    std::vector<int> test_indices;
    std::vector<int> fold_assignments;  // parallel to train_indices, values in [0, k)
    int k = 0;
};

// Metadata CSV: header `subject_id,site_id,age,sex,label,qc_pass`,
// sex in {M,F}, label in {0,1}, qc_pass in {0,1}.
inline Dataset load_dataset(const std::string& metadata_path, const std::string& features_path) {
    std::ifstream in(metadata_path);
    if (!in) throw DataError("cannot open '" + metadata_path + "'");

    std::string line;
    if (!std::getline(in, line)) throw ParseError(metadata_path + ": empty file");
    {
        auto header = split_csv_line(line);
        const std::vector<std::string> expected = {"subject_id", "site_id", "age", "sex", "label", "qc_pass"};
        if (header != std::vector<std::string>(expected.begin(), expected.end()))
            throw ParseError(metadata_path + " line 1: unexpected header");
    }

    Dataset d;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        const std::string ctx = "at " + metadata_path + " line " + std::to_string(line_no);
        if (f.size() != 6) throw ParseError(metadata_path + " line " + std::to_string(line_no) + ": expected 6 fields");
        SubjectRecord rec;
        rec.subject_id = f[0];
        rec.site_id = static_cast<int>(parse_long(f[1], ctx));
        rec.age = parse_double(f[2], ctx);
        if (f[3] == "M")
            rec.sex = Sex::male;
        else if (f[3] == "F")
            rec.sex = Sex::female;
        else
            throw ParseError(metadata_path + " line " + std::to_string(line_no) + ": sex must be M or F");
        const long label = parse_long(f[4], ctx);
        if (label != 0 && label != 1)
            throw ParseError(metadata_path + " line " + std::to_string(line_no) + ": label must be 0 or 1");
        rec.label = static_cast<int>(label);
        const long qc = parse_long(f[5], ctx);
        if (qc != 0 && qc != 1)
            throw ParseError(metadata_path + " line " + std::to_string(line_no) + ": qc_pass must be 0 or 1");
        rec.qc_pass = qc == 1;
        d.records.push_back(std::move(rec));
    }

    d.features = read_feature_matrix(features_path);
    d.validate();
    return d;
}

inline void save_dataset(const Dataset& d, const std::string& metadata_path, const std::string& features_path) {
    std::ofstream out(metadata_path);
    if (!out) throw DataError("cannot open '" + metadata_path + "' for writing");
    out << "subject_id,site_id,age,sex,label,qc_pass\n";
    for (const auto& rec : d.records) {
        out << rec.subject_id << ',' << rec.site_id << ',' << fmt_double(rec.age, 10) << ','
            << (rec.sex == Sex::male ? 'M' : 'F') << ',' << rec.label << ',' << (rec.qc_pass ? 1 : 0) << '\n';
    }
    write_feature_matrix_binary(features_path, d.features);
}

// Keeps qc_pass subjects, order preserved.
inline Dataset qc_filter(const Dataset& d) {
    std::vector<int> keep;
    for (std::size_t i = 0; i < d.records.size(); ++i)
        if (d.records[i].qc_pass) keep.push_back(static_cast<int>(i));
    return d.subset(keep);
}

// Label-stratified train/test split plus label-stratified fold assignment for
// the training set. Deterministic given seed. Per class, floor(fraction * n_c)
// subjects go to the test set.
inline SplitPlan make_split(const Dataset& d, double test_fraction, int k, std::uint64_t seed) {
    if (d.size() == 0) throw ConfigError("cannot split an empty dataset");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must be in (0,1)");
    if (k < 1) throw ConfigError("fold count must be positive");

    Rng rng(derive_seed(seed, 1));
    std::vector<int> by_class[2];
    for (Index i = 0; i < d.size(); ++i)
        by_class[d.records[static_cast<std::size_t>(i)].label].push_back(static_cast<int>(i));

    SplitPlan plan;
    plan.k = k;
    for (auto& group : by_class) {
        rng.shuffle(group);
        const std::size_t n_test = static_cast<std::size_t>(static_cast<double>(group.size()) * test_fraction);
        for (std::size_t i = 0; i < group.size(); ++i)
            (i < n_test ? plan.test_indices : plan.train_indices).push_back(group[i]);
    }
    if (static_cast<int>(plan.train_indices.size()) < k)
        throw ConfigError("fold count " + std::to_string(k) + " exceeds training-set size " +
                          std::to_string(plan.train_indices.size()));

    std::sort(plan.train_indices.begin(), plan.train_indices.end());
    std::sort(plan.test_indices.begin(), plan.test_indices.end());

    // Round-robin over a label-sorted, seeded ordering keeps folds stratified;
    // a single running counter keeps every fold nonempty.
    std::vector<int> order(plan.train_indices.size());
    std::iota(order.begin(), order.end(), 0);
    Rng fold_rng(derive_seed(seed, 2));
    fold_rng.shuffle(order);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return d.records[static_cast<std::size_t>(plan.train_indices[static_cast<std::size_t>(a)])].label <
               d.records[static_cast<std::size_t>(plan.train_indices[static_cast<std::size_t>(b)])].label;
    });
    plan.fold_assignments.assign(plan.train_indices.size(), 0);
    int next_fold = 0;
    for (int pos : order) {
        plan.fold_assignments[static_cast<std::size_t>(pos)] = next_fold;
        next_fold = (next_fold + 1) % k;
    }
    return plan;
}

// Synthetic multi-site dataset with planted class signal, used as the oracle
// generator throughout the test suites.
//   - features ~ N(0,1)
//   - site s adds site_shift * spread(s) to every feature, spread in [-1,1]
//   - ASD subjects get +effect_size on the first signal_dim features
//   - ages ~ U[5,62], sex ~ Bernoulli(0.79 male)
inline Dataset synth_dataset(int n_subjects, int n_sites, int feature_dim, int signal_dim,
                             double site_shift, double effect_size, std::uint64_t seed) {
    if (n_subjects < 1) throw ConfigError("synthetic dataset needs at least one subject");
    if (n_sites < 1) throw ConfigError("synthetic dataset needs at least one site");
    if (signal_dim > feature_dim) throw ConfigError("signal_dim exceeds feature_dim");

    Rng rng(derive_seed(seed, 3));
    Dataset d;
    d.records.reserve(static_cast<std::size_t>(n_subjects));
    d.features.resize(n_subjects, feature_dim);

    auto site_offset = [&](int s) {
        if (n_sites == 1) return 0.0;
        return site_shift * (2.0 * static_cast<double>(s) / static_cast<double>(n_sites - 1) - 1.0);
    };

    for (int i = 0; i < n_subjects; ++i) {
        SubjectRecord rec;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "S%05d", i);
        rec.subject_id = buf;
        rec.site_id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_sites)));
        rec.age = rng.uniform(5.0, 62.0);
        rec.sex = rng.bernoulli(0.79) ? Sex::male : Sex::female;
        rec.label = rng.bernoulli(0.5) ? 1 : 0;
        rec.qc_pass = true;

        const double offset = site_offset(rec.site_id);
        for (int v = 0; v < feature_dim; ++v) {
            double x = rng.normal() + offset;
            if (rec.label == 1 && v < signal_dim) x += effect_size;
            d.features(i, v) = x;
        }
        d.records.push_back(std::move(rec));
    }
    return d;
}

}  // namespace connlatent
