#pragma once

#include "connlatent/common.hpp"
#include "connlatent/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace connlatent {

// Parametric empirical-Bayes location/scale harmonization fitted on feature
// vectors. Site effects are removed; covariate (age, sex) effects are kept.
struct CombatModel {
    Vector alpha;          // per-feature grand intercept, length V
    Matrix beta;           // covariate coefficients, p x V
    Vector sigma;          // per-feature pooled standard deviation, length V
    Matrix gamma_star;     // adjusted location effects, S x V (standardized scale)
    Matrix delta2_star;    // adjusted scale effects, S x V
    std::vector<int> site_ids;       // site index -> site id, ascending
    Vector gamma_bar, tau2_bar;      // per-site EB location hyperparameters
    Vector lambda, theta;            // per-site inverse-gamma hyperparameters
    Vector covariate_means;          // centering offsets applied to covariates
    std::vector<std::uint8_t> skipped;  // per-feature: 1 = zero variance, identity adjustment

    Index feature_dim() const { return alpha.size(); }
    Index site_count() const { return static_cast<Index>(site_ids.size()); }
    Index covariate_dim() const { return beta.rows(); }

    int site_index(int site_id) const {
        const auto it = std::lower_bound(site_ids.begin(), site_ids.end(), site_id);
        if (it == site_ids.end() || *it != site_id) return -1;
        return static_cast<int>(it - site_ids.begin());
    }
};

namespace combat_detail {

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kEbTolerance = 1e-4;
inline constexpr int kEbMaxIterations = 100;

struct SiteGroups {
    std::vector<int> ids;                    // ascending
    std::vector<std::vector<int>> members;   // row indices per site
};

inline SiteGroups group_by_site(std::span<const int> site) {
    std::map<int, std::vector<int>> groups;
    for (std::size_t j = 0; j < site.size(); ++j) groups[site[j]].push_back(static_cast<int>(j));
    SiteGroups out;
    for (auto& [id, rows] : groups) {
        out.ids.push_back(id);
        out.members.push_back(std::move(rows));
    }
    return out;
}

}  // namespace combat_detail

inline CombatModel combat_fit(const Matrix& features, std::span<const int> site, const Matrix& covariates) {
    using namespace combat_detail;

    const Index n = features.rows();
    const Index v_dim = features.cols();
    const Index p = covariates.cols();
    if (static_cast<Index>(site.size()) != n) throw ShapeError("site vector length does not match feature rows");
    if (covariates.rows() != n) throw ShapeError("covariate rows do not match feature rows");

    const SiteGroups groups = group_by_site(site);
    const Index s_count = static_cast<Index>(groups.ids.size());
    for (Index i = 0; i < s_count; ++i) {
        if (groups.members[static_cast<std::size_t>(i)].size() < 2)
            throw ConfigError("site " + std::to_string(groups.ids[static_cast<std::size_t>(i)]) +
                              " has fewer than 2 subjects");
    }
    if (n <= p + s_count)
        throw ConfigError("not enough subjects to identify site and covariate effects");

    CombatModel model;
    model.site_ids = groups.ids;
    model.covariate_means = covariates.colwise().mean();
    Matrix x_centered = covariates.rowwise() - model.covariate_means.transpose();
    for (Index c = 0; c < p; ++c) {
        if (x_centered.col(c).squaredNorm() / static_cast<double>(n) < kVarianceFloor)
            throw ConfigError("covariate column " + std::to_string(c) + " is constant");
    }

    // Least squares with one-hot site columns; grand intercept is the
    // sample-size-weighted mean of the site intercepts, which enforces
    // sum_i n_i * gamma_hat_i = 0.
    Matrix design(n, s_count + p);
    design.setZero();
    for (Index i = 0; i < s_count; ++i)
        for (int row : groups.members[static_cast<std::size_t>(i)]) design(row, i) = 1.0;
    design.rightCols(p) = x_centered;

    Eigen::ColPivHouseholderQR<Matrix> qr(design);
    if (qr.rank() < s_count + p) throw ConfigError("design matrix is rank deficient (collinear covariates)");
    Matrix coefs = qr.solve(features);  // (S+p) x V

    Vector site_weights(s_count);
    for (Index i = 0; i < s_count; ++i)
        site_weights(i) = static_cast<double>(groups.members[static_cast<std::size_t>(i)].size()) /
                          static_cast<double>(n);
    model.alpha = coefs.topRows(s_count).transpose() * site_weights;
    model.beta = coefs.bottomRows(p);

    Matrix fitted = design * coefs;
    Matrix residual = features - fitted;
    Vector sigma2 = residual.array().square().colwise().mean();

    model.skipped.assign(static_cast<std::size_t>(v_dim), 0);
    model.sigma = Vector::Ones(v_dim);
    std::vector<Index> active;
    for (Index v = 0; v < v_dim; ++v) {
        if (sigma2(v) < kVarianceFloor) {
            model.skipped[static_cast<std::size_t>(v)] = 1;
            warn("feature " + std::to_string(v) + " has zero residual variance; skipped by harmonization");
        } else {
            model.sigma(v) = std::sqrt(sigma2(v));
            active.push_back(v);
        }
    }

    // Standardized residuals, keeping site effects in.
    Matrix z = features;
    z.noalias() -= x_centered * model.beta;
    z.rowwise() -= model.alpha.transpose();
    z.array().rowwise() /= model.sigma.transpose().array();

    // Per-site location/scale estimates on the standardized scale.
    Matrix gamma_hat(s_count, v_dim);   // per-site mean of Z
    Matrix delta2_hat(s_count, v_dim);  // per-site population variance of Z
    for (Index i = 0; i < s_count; ++i) {
        const auto& rows = groups.members[static_cast<std::size_t>(i)];
        const double n_i = static_cast<double>(rows.size());
        Vector sum = Vector::Zero(v_dim);
        Vector sum2 = Vector::Zero(v_dim);
        for (int row : rows) {
            sum += z.row(row).transpose();
            sum2 += z.row(row).transpose().cwiseAbs2();
        }
        gamma_hat.row(i) = (sum / n_i).transpose();
        delta2_hat.row(i) = (sum2 / n_i - (sum / n_i).cwiseAbs2()).cwiseMax(0.0).transpose();
    }

    // Method-of-moments hyperparameters across features.
    model.gamma_bar = Vector::Zero(s_count);
    model.tau2_bar = Vector::Zero(s_count);
    model.lambda = Vector::Zero(s_count);
    model.theta = Vector::Zero(s_count);
    std::vector<bool> shrink(static_cast<std::size_t>(s_count), true);
    const double n_active = static_cast<double>(active.size());
    if (active.empty()) throw DataError("all features have zero variance; nothing to harmonize");
    for (Index i = 0; i < s_count; ++i) {
        double g_sum = 0, g_sum2 = 0, d_sum = 0, d_sum2 = 0;
        for (Index v : active) {
            g_sum += gamma_hat(i, v);
            g_sum2 += gamma_hat(i, v) * gamma_hat(i, v);
            d_sum += delta2_hat(i, v);
            d_sum2 += delta2_hat(i, v) * delta2_hat(i, v);
        }
        const double g_mean = g_sum / n_active;
        const double d_mean = d_sum / n_active;
        const double bessel = n_active > 1 ? n_active / (n_active - 1) : 1.0;
        const double g_var = std::max(0.0, (g_sum2 / n_active - g_mean * g_mean) * bessel);
        const double d_var = std::max(0.0, (d_sum2 / n_active - d_mean * d_mean) * bessel);
        model.gamma_bar(i) = g_mean;
        model.tau2_bar(i) = g_var;
        if (d_var < kVarianceFloor) {
            shrink[static_cast<std::size_t>(i)] = false;  // degenerate prior: keep raw estimates
        } else {
            model.lambda(i) = (d_mean * d_mean + 2.0 * d_var) / d_var;
            model.theta(i) = (d_mean * d_mean * d_mean + d_mean * d_var) / d_var;
        }
    }

    // EB fixed point per site, vectorized over features.
    model.gamma_star = gamma_hat;
    model.delta2_star = delta2_hat;
    for (Index i = 0; i < s_count; ++i) {
        if (!shrink[static_cast<std::size_t>(i)]) continue;
        const auto& rows = groups.members[static_cast<std::size_t>(i)];
        const double n_i = static_cast<double>(rows.size());
        Vector sum_z = Vector::Zero(v_dim);
        Vector sum_z2 = Vector::Zero(v_dim);
        for (int row : rows) {
            sum_z += z.row(row).transpose();
            sum_z2 += z.row(row).transpose().cwiseAbs2();
        }

        Vector g = gamma_hat.row(i).transpose();
        Vector d = delta2_hat.row(i).transpose();
        const double tau2 = model.tau2_bar(i);
        const double g_bar = model.gamma_bar(i);
        const double lam = model.lambda(i);
        const double th = model.theta(i);

        bool converged = false;
        for (int iter = 0; iter < kEbMaxIterations; ++iter) {
            Vector g_new(v_dim), d_new(v_dim);
            double max_change = 0.0;
            for (Index v : active) {
                const double gn = (n_i * tau2 * gamma_hat(i, v) + d(v) * g_bar) / (n_i * tau2 + d(v));
                const double sse = sum_z2(v) - 2.0 * gn * sum_z(v) + n_i * gn * gn;
                const double dn = (th + 0.5 * sse) / (n_i / 2.0 + lam - 1.0);
                max_change = std::max(max_change, std::abs(gn - g(v)) / std::max(std::abs(g(v)), 1e-12));
                max_change = std::max(max_change, std::abs(dn - d(v)) / std::max(std::abs(d(v)), 1e-12));
                g_new(v) = gn;
                d_new(v) = dn;
            }
            for (Index v : active) {
                g(v) = g_new(v);
                d(v) = d_new(v);
            }
            if (max_change < kEbTolerance) {
                converged = true;
                break;
            }
        }
        if (!converged)
            warn("EB iteration for site " + std::to_string(model.site_ids[static_cast<std::size_t>(i)]) +
                 " did not converge in " + std::to_string(kEbMaxIterations) + " iterations; using last iterate");
        model.gamma_star.row(i) = g.transpose();
        model.delta2_star.row(i) = d.transpose();
    }

    // Identity adjustment for skipped features.
    for (Index v = 0; v < v_dim; ++v) {
        if (model.skipped[static_cast<std::size_t>(v)]) {
            model.gamma_star.col(v).setZero();
            model.delta2_star.col(v).setOnes();
        }
    }
    return model;
}

inline Matrix combat_apply(const CombatModel& model, const Matrix& features, std::span<const int> site,
                           const Matrix& covariates) {
    const Index n = features.rows();
    const Index v_dim = features.cols();
    if (v_dim != model.feature_dim()) throw ShapeError("feature width does not match harmonization model");
    if (static_cast<Index>(site.size()) != n) throw ShapeError("site vector length does not match feature rows");
    if (covariates.rows() != n || covariates.cols() != model.covariate_dim())
        throw ShapeError("covariate shape does not match harmonization model");

    std::vector<int> site_idx(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
        const int idx = model.site_index(site[static_cast<std::size_t>(j)]);
        if (idx < 0)
            throw DataError("site " + std::to_string(site[static_cast<std::size_t>(j)]) +
                            " was not present when the harmonization model was fitted");
        site_idx[static_cast<std::size_t>(j)] = idx;
    }

    Matrix x_centered = covariates.rowwise() - model.covariate_means.transpose();
    Matrix covariate_part = x_centered * model.beta;  // n x V

    Matrix out(n, v_dim);
    for (Index j = 0; j < n; ++j) {
        const Index i = site_idx[static_cast<std::size_t>(j)];
        for (Index v = 0; v < v_dim; ++v) {
            if (model.skipped[static_cast<std::size_t>(v)]) {
                out(j, v) = features(j, v);
                continue;
            }
            const double zjv = (features(j, v) - model.alpha(v) - covariate_part(j, v)) / model.sigma(v);
            const double adjusted = (zjv - model.gamma_star(i, v)) / std::sqrt(model.delta2_star(i, v));
            out(j, v) = model.sigma(v) * adjusted + model.alpha(v) + covariate_part(j, v);
        }
    }
    return out;
}

inline constexpr char kCombatMagic[9] = "CMBT0001";

inline void save_combat(const CombatModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out.write(kCombatMagic, 8);
    const Index v_dim = model.feature_dim();
    const Index s_count = model.site_count();
    const Index p = model.covariate_dim();
    detail::write_u64_le(out, static_cast<std::uint64_t>(v_dim));
    detail::write_u64_le(out, static_cast<std::uint64_t>(s_count));
    detail::write_u64_le(out, static_cast<std::uint64_t>(p));
    for (Index v = 0; v < v_dim; ++v) detail::write_f64_le(out, model.alpha(v));
    for (Index v = 0; v < v_dim; ++v)
        for (Index c = 0; c < p; ++c) detail::write_f64_le(out, model.beta(c, v));
    for (Index v = 0; v < v_dim; ++v) detail::write_f64_le(out, model.sigma(v));
    for (Index i = 0; i < s_count; ++i)
        for (Index v = 0; v < v_dim; ++v) detail::write_f64_le(out, model.gamma_star(i, v));
    for (Index i = 0; i < s_count; ++i)
        for (Index v = 0; v < v_dim; ++v) detail::write_f64_le(out, model.delta2_star(i, v));
    for (int id : model.site_ids) detail::write_u64_le(out, static_cast<std::uint64_t>(id));
    for (Index i = 0; i < s_count; ++i) detail::write_f64_le(out, model.gamma_bar(i));
    for (Index i = 0; i < s_count; ++i) detail::write_f64_le(out, model.tau2_bar(i));
    for (Index i = 0; i < s_count; ++i) detail::write_f64_le(out, model.lambda(i));
    for (Index i = 0; i < s_count; ++i) detail::write_f64_le(out, model.theta(i));
    for (Index c = 0; c < p; ++c) detail::write_f64_le(out, model.covariate_means(c));
    for (Index v = 0; v < v_dim; ++v) out.put(static_cast<char>(model.skipped[static_cast<std::size_t>(v)]));
    if (!out) throw DataError("short write to '" + path + "'");
}

inline CombatModel load_combat(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    char magic[8] = {};
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, kCombatMagic, 8) != 0)
        throw ParseError("'" + path + "' is not a harmonization model file");
    const Index v_dim = static_cast<Index>(detail::read_u64_le(in));
    const Index s_count = static_cast<Index>(detail::read_u64_le(in));
    const Index p = static_cast<Index>(detail::read_u64_le(in));

    CombatModel model;
    model.alpha.resize(v_dim);
    model.beta.resize(p, v_dim);
    model.sigma.resize(v_dim);
    model.gamma_star.resize(s_count, v_dim);
    model.delta2_star.resize(s_count, v_dim);
    model.site_ids.resize(static_cast<std::size_t>(s_count));
    model.gamma_bar.resize(s_count);
    model.tau2_bar.resize(s_count);
    model.lambda.resize(s_count);
    model.theta.resize(s_count);
    model.covariate_means.resize(p);
    model.skipped.resize(static_cast<std::size_t>(v_dim));

    for (Index v = 0; v < v_dim; ++v) model.alpha(v) = detail::read_f64_le(in);
    for (Index v = 0; v < v_dim; ++v)
        for (Index c = 0; c < p; ++c) model.beta(c, v) = detail::read_f64_le(in);
    for (Index v = 0; v < v_dim; ++v) model.sigma(v) = detail::read_f64_le(in);
    for (Index i = 0; i < s_count; ++i)
        for (Index v = 0; v < v_dim; ++v) model.gamma_star(i, v) = detail::read_f64_le(in);
    for (Index i = 0; i < s_count; ++i)
        for (Index v = 0; v < v_dim; ++v) model.delta2_star(i, v) = detail::read_f64_le(in);
    for (auto& id : model.site_ids) id = static_cast<int>(detail::read_u64_le(in));
    for (Index i = 0; i < s_count; ++i) model.gamma_bar(i) = detail::read_f64_le(in);
    for (Index i = 0; i < s_count; ++i) model.tau2_bar(i) = detail::read_f64_le(in);
    for (Index i = 0; i < s_count; ++i) model.lambda(i) = detail::read_f64_le(in);
    for (Index i = 0; i < s_count; ++i) model.theta(i) = detail::read_f64_le(in);
    for (Index c = 0; c < p; ++c) model.covariate_means(c) = detail::read_f64_le(in);
    for (auto& flag : model.skipped) flag = static_cast<std::uint8_t>(in.get());
    if (!in) throw ParseError("truncated harmonization model '" + path + "'");
    return model;
}

}  // namespace connlatent
