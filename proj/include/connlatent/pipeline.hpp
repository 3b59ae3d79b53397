#pragma once

#include "connlatent/classifier.hpp"
#include "connlatent/combat.hpp"
#include "connlatent/common.hpp"
#include "connlatent/config.hpp"
#include "connlatent/connectome.hpp"
#include "connlatent/dataset.hpp"
#include "connlatent/dvae.hpp"
#include "connlatent/eval.hpp"
#include "connlatent/metrics.hpp"
#include "connlatent/svg.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace connlatent {

inline void emit_plots(const std::string& dir, bool render_svg);

struct FamilyResult {
    bool valid = false;
    ClassifierConfig config;
    double cv_auc = 0.0;
    double threshold = 0.0;
    Metrics holdout;
    std::vector<std::pair<double, double>> roc;
    std::vector<BootstrapCI> bootstrap;
    bool has_permutation = false;
    PermutationResult permutation;
};

struct SiteResult {
    int site = 0;
    Metrics svm;
    Metrics rf;
};

struct LosocvResult {
    std::vector<SiteResult> per_site;
    Metrics svm_average;
    Metrics rf_average;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    int n_subjects = 0;
    int n_after_qc = 0;
    Index raw_feature_dim = 0;
    Index classifier_input_dim = 0;
    FamilyResult svm;
    FamilyResult rf;
    bool has_losocv = false;
    LosocvResult losocv;
    std::vector<StageTiming> timings;
    double classify_seconds = 0.0;
    std::vector<std::string> written_files;
};

namespace pipeline_detail {

struct RunContext {
    std::string dir;
    std::vector<std::string>* written = nullptr;

    std::string path(const std::string& name) const { return dir + "/" + name; }
    void wrote(const std::string& p) const {
        if (written) written->push_back(p);
    }
};

inline void rename_partials(const std::vector<std::string>& files) {
    for (const auto& f : files) {
        std::error_code ec;
        if (std::filesystem::exists(f, ec)) std::filesystem::rename(f, f + ".partial", ec);
    }
}

[[noreturn]] inline void annotate_and_rethrow(const std::string& stage) {
    const std::string prefix = "stage '" + stage + "': ";
    try {
        throw;
    } catch (const ParseError& e) {
        throw ParseError(prefix + e.what());
    } catch (const ShapeError& e) {
        throw ShapeError(prefix + e.what());
    } catch (const DataError& e) {
        throw DataError(prefix + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(prefix + e.what());
    } catch (const TrainError& e) {
        throw TrainError(prefix + e.what());
    } catch (const EvalError& e) {
        throw EvalError(prefix + e.what());
    } catch (const std::exception& e) {
        throw Error(prefix + e.what());
    }
}

class StageRunner {
public:
    StageRunner(std::vector<StageTiming>& timings, std::vector<std::string>& files)
        : timings_(timings), files_(files) {}

    template <class Fn>
    void operator()(const std::string& name, Fn&& fn) {
        const auto start = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (...) {
            rename_partials(files_);
            annotate_and_rethrow(name);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        timings_.push_back({name, secs});
    }

private:
    std::vector<StageTiming>& timings_;
    std::vector<std::string>& files_;
};

// Covariate matrix with the configured column subset, fixed (age, sex) order.
inline Matrix covariate_matrix(const Dataset& d, bool use_age, bool use_sex) {
    const Index cols = (use_age ? 1 : 0) + (use_sex ? 1 : 0);
    Matrix out(d.size(), cols);
    Index c = 0;
    if (use_age) {
        for (Index i = 0; i < d.size(); ++i) out(i, c) = d.records[static_cast<std::size_t>(i)].age;
        ++c;
    }
    if (use_sex) {
        for (Index i = 0; i < d.size(); ++i)
            out(i, c) = static_cast<double>(d.records[static_cast<std::size_t>(i)].sex);
    }
    return out;
}

// Harmonize + DVAE (or raw passthrough) + optional covariate append, applied
// to a train/test pair. Artifacts are written only when ctx is provided.
struct PreparedFeatures {
    Matrix train;
    Matrix test;
    std::vector<ElboTerms> loss_curve;
};

inline PreparedFeatures prepare_features(const Dataset& train, const Dataset& test, const PipelineConfig& cfg,
                                         std::uint64_t seed, const RunContext* ctx) {
    PreparedFeatures out;
    out.train = train.features;
    out.test = test.features;

    if (cfg.harmonize) {
        const Matrix cov_train = covariate_matrix(train, cfg.harmonize_age, cfg.harmonize_sex);
        const Matrix cov_test = covariate_matrix(test, cfg.harmonize_age, cfg.harmonize_sex);
        CombatModel model;
        if (cfg.harmonize_fit_on == "all") {
            Dataset all;
            all.records = train.records;
            all.records.insert(all.records.end(), test.records.begin(), test.records.end());
            all.features.resize(train.size() + test.size(), train.features.cols());
            all.features.topRows(train.size()) = train.features;
            all.features.bottomRows(test.size()) = test.features;
            model = combat_fit(all.features, all.sites(), covariate_matrix(all, cfg.harmonize_age, cfg.harmonize_sex));
        } else {
            model = combat_fit(out.train, train.sites(), cov_train);
        }
        out.train = combat_apply(model, out.train, train.sites(), cov_train);
        out.test = combat_apply(model, out.test, test.sites(), cov_test);
        if (ctx) {
            save_combat(model, ctx->path("combat_model.bin"));
            ctx->wrote(ctx->path("combat_model.bin"));
        }
    }

    if (cfg.use_dvae) {
        DvaeTrainConfig dv = cfg.dvae;
        dv.seed = derive_seed(seed, 101);
        const DvaeTrainResult trained = train_dvae(out.train, dv);
        out.loss_curve = trained.curve;
        if (ctx) {
            write_loss_curve(ctx->path("loss_curve.csv"), trained.curve);
            ctx->wrote(ctx->path("loss_curve.csv"));
            save_dvae(trained.model, ctx->path("dvae_model.bin"));
            ctx->wrote(ctx->path("dvae_model.bin"));
        }
        out.train = extract(trained.model, out.train).concat();
        out.test = extract(trained.model, out.test).concat();
    }

    if (cfg.append_age || cfg.append_sex) {
        const Matrix cov_train = covariate_matrix(train, cfg.append_age, cfg.append_sex);
        const Matrix cov_test = covariate_matrix(test, cfg.append_age, cfg.append_sex);
        Matrix adj_train = cov_train;
        Matrix adj_test = cov_test;
        if (cfg.append_age) {
            // standardize age with training statistics; raw years would
            // dominate rbf distances
            const double mean = cov_train.col(0).mean();
            const double sd = std::sqrt((cov_train.col(0).array() - mean).square().mean());
            const double scale = sd < 1e-12 ? 1.0 : sd;
            adj_train.col(0) = (cov_train.col(0).array() - mean) / scale;
            adj_test.col(0) = (cov_test.col(0).array() - mean) / scale;
        }
        Matrix new_train(out.train.rows(), out.train.cols() + adj_train.cols());
        new_train << out.train, adj_train;
        Matrix new_test(out.test.rows(), out.test.cols() + adj_test.cols());
        new_test << out.test, adj_test;
        out.train = std::move(new_train);
        out.test = std::move(new_test);
    }
    return out;
}

// Grid search, out-of-fold threshold tuning, final fit, holdout metrics.
inline std::pair<FamilyResult, FamilyResult> classify_stage(const Matrix& x_train, const std::vector<int>& y_train,
                                                            const Matrix& x_test, const std::vector<int>& y_test,
                                                            const PipelineConfig& cfg, std::uint64_t seed,
                                                            GridSearchResult* grid_out) {
    const GridSearchResult grid = grid_search(x_train, y_train, cfg.grid, cfg.folds, derive_seed(seed, 102),
                                              cfg.threads);
    if (grid_out) *grid_out = grid;

    auto run_family = [&](ModelKind kind, std::uint64_t fit_seed) {
        FamilyResult fam;
        const int idx = kind == ModelKind::svm ? grid.best_svm : grid.best_rf;
        if (idx < 0) {
            warn(std::string(model_name(kind)) + ": every grid cell failed; family skipped");
            return fam;
        }
        const GridCell& cell = grid.cells[static_cast<std::size_t>(idx)];
        fam.valid = true;
        fam.config = cell.config;
        fam.cv_auc = cell.mean_auc;

        const Vector oof = cross_val_scores(x_train, y_train, fam.config, cfg.folds, derive_seed(seed, 102),
                                            cfg.threads);
        fam.threshold = tune_threshold(oof, y_train);

        TrainedClassifier final_model = fit_classifier(fam.config, x_train, y_train, fit_seed, cfg.threads);
        final_model.threshold = fam.threshold;
        const Vector test_scores = classifier_scores(final_model, x_test);
        fam.holdout = compute_metrics(test_scores, y_test, fam.threshold);
        fam.roc = roc_points(test_scores, y_test);
        return fam;
    };

    return {run_family(ModelKind::svm, derive_seed(seed, 105)), run_family(ModelKind::rf, derive_seed(seed, 106))};
}

inline void write_grid_scores(const std::string& path, const GridSearchResult& grid) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << "model,kernel,C,gamma,n_trees,max_depth,fold,auc\n";
    for (const auto& cell : grid.cells) {
        for (std::size_t fold = 0; fold < cell.fold_auc.size(); ++fold) {
            const bool is_svm = cell.config.kind == ModelKind::svm;
            out << model_name(cell.config.kind) << ',';
            out << (is_svm ? kernel_name(cell.config.kernel) : "") << ',';
            out << (is_svm ? fmt_double(cell.config.C, 10) : "") << ',';
            out << (is_svm && cell.config.kernel == Kernel::rbf ? fmt_double(cell.config.gamma, 10) : "") << ',';
            out << (is_svm ? "" : std::to_string(cell.config.n_trees)) << ',';
            out << (is_svm ? "" : std::to_string(cell.config.max_depth)) << ',';
            out << fold << ',';
            const double auc = cell.fold_auc[fold];
            out << (std::isnan(auc) ? "" : fmt_double(auc, 10)) << '\n';
        }
    }
}

inline void append_metric_rows(std::ostream& out, const std::string& protocol, const std::string& model,
                               const Metrics& m) {
    const std::pair<const char*, double> rows[] = {{"accuracy", m.accuracy},
                                                   {"sensitivity", m.sensitivity},
                                                   {"specificity", m.specificity},
                                                   {"auc", m.auc}};
    for (const auto& [name, value] : rows)
        out << protocol << ',' << model << ',' << name << ',' << fmt_double(value, 10) << ",,,\n";
}

inline Metrics average_metrics(const std::vector<Metrics>& items) {
    Metrics avg;
    for (const auto& m : items) {
        avg.accuracy += m.accuracy;
        avg.sensitivity += m.sensitivity;
        avg.specificity += m.specificity;
        avg.auc += m.auc;
    }
    const double n = static_cast<double>(items.size());
    avg.accuracy /= n;
    avg.sensitivity /= n;
    avg.specificity /= n;
    avg.auc /= n;
    return avg;
}

}  // namespace pipeline_detail

// Leave-one-site-out cross-validation over the qualifying sites: the
// training pipeline (DVAE, grid search, threshold) is rerun from scratch with
// one site held out each time. Harmonization is fitted once on the whole
// dataset first: a location/scale model fitted without a site cannot adjust
// that site, so per-fold fitting would make the held-out site unadjustable.
// Averages are unweighted.
inline LosocvResult losocv_run(const Dataset& data, const PipelineConfig& cfg) {
    const std::vector<int> sites = losocv_sites(data, cfg.min_per_class);
    if (sites.empty())
        throw ConfigError("no site has more than " + std::to_string(cfg.min_per_class) +
                          " subjects of each class");

    Dataset adjusted = data;
    PipelineConfig fold_cfg = cfg;
    if (cfg.harmonize) {
        const Matrix cov = pipeline_detail::covariate_matrix(data, cfg.harmonize_age, cfg.harmonize_sex);
        const CombatModel model = combat_fit(data.features, data.sites(), cov);
        adjusted.features = combat_apply(model, data.features, data.sites(), cov);
        fold_cfg.harmonize = false;
    }

    LosocvResult result;
    std::vector<Metrics> svm_all, rf_all;
    for (std::size_t s = 0; s < sites.size(); ++s) {
        const int held_out = sites[s];
        std::vector<int> train_idx, test_idx;
        for (Index i = 0; i < adjusted.size(); ++i)
            (adjusted.records[static_cast<std::size_t>(i)].site_id == held_out ? test_idx : train_idx)
                .push_back(static_cast<int>(i));
        const Dataset train = adjusted.subset(train_idx);
        const Dataset test = adjusted.subset(test_idx);

        const std::uint64_t site_seed = derive_seed(cfg.seed, 500 + s);
        const auto prepared = pipeline_detail::prepare_features(train, test, fold_cfg, site_seed, nullptr);
        const auto [svm_fam, rf_fam] = pipeline_detail::classify_stage(
            prepared.train, train.labels(), prepared.test, test.labels(), fold_cfg, site_seed, nullptr);

        SiteResult site_result;
        site_result.site = held_out;
        if (svm_fam.valid) site_result.svm = svm_fam.holdout;
        if (rf_fam.valid) site_result.rf = rf_fam.holdout;
        result.per_site.push_back(site_result);
        svm_all.push_back(site_result.svm);
        rf_all.push_back(site_result.rf);
    }
    result.svm_average = pipeline_detail::average_metrics(svm_all);
    result.rf_average = pipeline_detail::average_metrics(rf_all);
    return result;
}

// Full pipeline: load -> qc -> split -> [combat] -> [dvae | raw] ->
// [covariate append] -> grid search -> threshold -> holdout metrics ->
// optional bootstrap / permutation / LOSOCV. Writes every report artifact
// into cfg.output_dir; on a stage failure the artifacts written so far are
// renamed with a .partial suffix.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
    using pipeline_detail::RunContext;
    using pipeline_detail::StageRunner;

    PipelineResult result;
    std::filesystem::create_directories(cfg.output_dir);
    RunContext ctx{cfg.output_dir, &result.written_files};
    StageRunner stage(result.timings, result.written_files);

    Dataset data;
    stage("load", [&] {
        if (cfg.metadata_path.empty() || cfg.features_path.empty())
            throw ConfigError("data.metadata and data.features are required");
        if (cfg.features_kind == "timeseries-list") {
            // one time-series file per subject, one path per line
            std::istringstream list(read_text_file(cfg.features_path));
            std::vector<std::string> paths;
            std::string line;
            while (std::getline(list, line)) {
                if (!line.empty() && line != "\r") paths.push_back(config_detail::trim(line));
            }
            if (paths.empty()) throw DataError("time-series list '" + cfg.features_path + "' is empty");
            std::vector<Vector> vectors(paths.size());
            parallel_for(paths.size(), cfg.threads, [&](std::size_t i) {
                RoiTimeSeries ts{read_feature_matrix(paths[i])};
                vectors[i] = vectorize(pearson_matrix(ts));
            });
            Matrix features(static_cast<Index>(vectors.size()), vectors[0].size());
            for (std::size_t i = 0; i < vectors.size(); ++i) {
                if (vectors[i].size() != features.cols())
                    throw ShapeError("time series '" + paths[i] + "' has a different ROI count");
                features.row(static_cast<Index>(i)) = vectors[i].transpose();
            }
            const std::string tmp_features = ctx.path("vectorized_features.bin");
            write_feature_matrix_binary(tmp_features, features);
            ctx.wrote(tmp_features);
            data = load_dataset(cfg.metadata_path, tmp_features);
        } else {
            data = load_dataset(cfg.metadata_path, cfg.features_path);
        }
        result.n_subjects = static_cast<int>(data.size());
        result.raw_feature_dim = data.feature_dim();
    });

    stage("qc", [&] {
        data = qc_filter(data);
        result.n_after_qc = static_cast<int>(data.size());
        if (data.size() == 0) throw DataError("no subject passed quality control");
    });

    SplitPlan plan;
    Dataset train, test;
    stage("split", [&] {
        plan = make_split(data, cfg.test_fraction, cfg.folds, cfg.seed);
        train = data.subset(plan.train_indices);
        test = data.subset(plan.test_indices);

        std::ofstream out(ctx.path("split_indices.csv"));
        out << "role,row,subject_id,label\n";
        for (std::size_t i = 0; i < plan.train_indices.size(); ++i) {
            const auto& rec = data.records[static_cast<std::size_t>(plan.train_indices[i])];
            out << "train," << plan.train_indices[i] << ',' << rec.subject_id << ',' << rec.label << '\n';
        }
        for (int idx : plan.test_indices) {
            const auto& rec = data.records[static_cast<std::size_t>(idx)];
            out << "test," << idx << ',' << rec.subject_id << ',' << rec.label << '\n';
        }
        ctx.wrote(ctx.path("split_indices.csv"));
    });

    pipeline_detail::PreparedFeatures prepared;
    stage("features", [&] {
        prepared = pipeline_detail::prepare_features(train, test, cfg, cfg.seed, &ctx);
        result.classifier_input_dim = prepared.train.cols();
        write_matrix_csv(ctx.path("train_features.csv"), prepared.train, 17);
        ctx.wrote(ctx.path("train_features.csv"));
        write_matrix_csv(ctx.path("test_features.csv"), prepared.test, 17);
        ctx.wrote(ctx.path("test_features.csv"));
    });

    const std::vector<int> y_train = train.labels();
    const std::vector<int> y_test = test.labels();

    GridSearchResult grid;
    stage("classify", [&] {
        const auto start = std::chrono::steady_clock::now();
        auto [svm_fam, rf_fam] = pipeline_detail::classify_stage(prepared.train, y_train, prepared.test,
                                                                 y_test, cfg, cfg.seed, &grid);
        result.classify_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.svm = std::move(svm_fam);
        result.rf = std::move(rf_fam);

        pipeline_detail::write_grid_scores(ctx.path("grid_scores.csv"), grid);
        ctx.wrote(ctx.path("grid_scores.csv"));

        std::ofstream roc(ctx.path("roc.csv"));
        roc << "model,fpr,tpr\n";
        for (const auto* fam : {&result.svm, &result.rf}) {
            if (!fam->valid) continue;
            for (const auto& [fpr, tpr] : fam->roc)
                roc << model_name(fam->config.kind) << ',' << fmt_double(fpr, 10) << ',' << fmt_double(tpr, 10)
                    << '\n';
        }
        ctx.wrote(ctx.path("roc.csv"));
    });

    if (cfg.run_bootstrap) {
        stage("bootstrap", [&] {
            const EvalSplit split{prepared.train, y_train, prepared.test, y_test};
            if (cfg.bootstrap_svm && result.svm.valid)
                result.svm.bootstrap = bootstrap_ci(split, result.svm.config, result.svm.holdout,
                                                    cfg.bootstrap_b, derive_seed(cfg.seed, 103), cfg.threads);
            if (cfg.bootstrap_rf && result.rf.valid)
                result.rf.bootstrap = bootstrap_ci(split, result.rf.config, result.rf.holdout,
                                                   cfg.bootstrap_b, derive_seed(cfg.seed, 104), cfg.threads);
        });
    }

    if (cfg.run_permutation) {
        stage("permutation", [&] {
            const EvalSplit split{prepared.train, y_train, prepared.test, y_test};
            for (auto* fam : {&result.svm, &result.rf}) {
                if (!fam->valid) continue;
                const std::uint64_t perm_seed =
                    derive_seed(cfg.seed, fam->config.kind == ModelKind::svm ? 107 : 108);
                fam->permutation = permutation_test(split, fam->config, cfg.permutation_n, perm_seed,
                                                    cfg.permutation_metric, cfg.threads);
                fam->has_permutation = true;

                const std::string path =
                    ctx.path(std::string("permutation_") + model_name(fam->config.kind) + ".csv");
                std::ofstream out(path);
                out << "iteration,metric_value\n";
                for (std::size_t i = 0; i < fam->permutation.permuted.size(); ++i)
                    out << i << ',' << fmt_double(fam->permutation.permuted[i], 10) << '\n';
                out << "observed," << fmt_double(fam->permutation.observed, 10) << '\n';
                ctx.wrote(path);
            }
        });
    }

    if (cfg.run_losocv) {
        stage("losocv", [&] {
            result.losocv = losocv_run(data, cfg);
            result.has_losocv = true;
        });
    }

    stage("report", [&] {
        std::ofstream out(ctx.path("metrics.csv"));
        out << "protocol,model,metric,value,ci_lower,ci_upper,p_value\n";
        for (const auto* fam : {&result.svm, &result.rf}) {
            if (!fam->valid) continue;
            const std::string model = model_name(fam->config.kind);
            pipeline_detail::append_metric_rows(out, "holdout", model, fam->holdout);
            for (const auto& ci : fam->bootstrap)
                out << "bootstrap," << model << ',' << ci.metric << ',' << fmt_double(ci.point, 10) << ','
                    << fmt_double(ci.lower, 10) << ',' << fmt_double(ci.upper, 10) << ",\n";
            if (fam->has_permutation)
                out << "permutation," << model << ',' << metric_name(cfg.permutation_metric) << ','
                    << fmt_double(fam->permutation.observed, 10) << ",,,"
                    << fmt_double(fam->permutation.p_value, 10) << '\n';
        }
        if (result.has_losocv) {
            for (const auto& site : result.losocv.per_site) {
                const std::string protocol = "losocv_site_" + std::to_string(site.site);
                pipeline_detail::append_metric_rows(out, protocol, "svm", site.svm);
                pipeline_detail::append_metric_rows(out, protocol, "rf", site.rf);
            }
            pipeline_detail::append_metric_rows(out, "losocv_avg", "svm", result.losocv.svm_average);
            pipeline_detail::append_metric_rows(out, "losocv_avg", "rf", result.losocv.rf_average);
        }
        out.close();
        ctx.wrote(ctx.path("metrics.csv"));

        nlohmann::json manifest;
        manifest["version"] = kVersion;
        manifest["seed"] = cfg.seed;
        manifest["config"] = config_to_map(cfg);
        manifest["dataset"] = {{"n_subjects", result.n_subjects},
                               {"n_after_qc", result.n_after_qc},
                               {"n_train", plan.train_indices.size()},
                               {"n_test", plan.test_indices.size()},
                               {"raw_feature_dim", result.raw_feature_dim},
                               {"classifier_input_dim", result.classifier_input_dim}};
        for (const auto* fam : {&result.svm, &result.rf}) {
            if (!fam->valid) continue;
            nlohmann::json sel{{"cv_auc", fam->cv_auc}, {"threshold", fam->threshold}};
            if (fam->config.kind == ModelKind::svm) {
                sel["kernel"] = kernel_name(fam->config.kernel);
                sel["C"] = fam->config.C;
                if (fam->config.kernel == Kernel::rbf) sel["gamma"] = fam->config.gamma;
            } else {
                sel["n_trees"] = fam->config.n_trees;
                sel["max_depth"] = fam->config.max_depth;
            }
            manifest["selected"][model_name(fam->config.kind)] = sel;
        }
        write_text_file(ctx.path("manifest.json"), manifest.dump(2) + "\n");
        ctx.wrote(ctx.path("manifest.json"));

        std::ofstream timings(ctx.path("timings.csv"));
        timings << "stage,seconds\n";
        for (const auto& t : result.timings) timings << t.stage << ',' << fmt_double(t.seconds, 6) << '\n';
        timings << "classify_total," << fmt_double(result.classify_seconds, 6) << '\n';
    });

    if (cfg.write_svg) {
        stage("plots", [&] { emit_plots(cfg.output_dir, true); });
    }
    return result;
}

// Renders the plot-data CSVs in `dir` as standalone SVG charts. Missing stage
// outputs are skipped with a warning.
inline void emit_plots(const std::string& dir, bool render_svg = true) {
    namespace fs = std::filesystem;
    if (!render_svg) return;
    const auto exists = [&](const std::string& name) { return fs::exists(dir + "/" + name); };

    if (exists("loss_curve.csv")) {
        std::istringstream in(read_text_file(dir + "/loss_curve.csv"));
        std::string line;
        std::getline(in, line);  // header
        std::vector<std::pair<double, double>> points;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_csv_line(line);
            points.emplace_back(parse_double(f[0], "in loss_curve.csv"), parse_double(f[1], "in loss_curve.csv"));
        }
        svg::write_line_chart(dir + "/loss_curve.svg", points, "training loss", "epoch", "negative ELBO");
    } else {
        warn("loss_curve.csv not found; skipping loss plot");
    }

    if (exists("roc.csv")) {
        std::istringstream in(read_text_file(dir + "/roc.csv"));
        std::string line;
        std::getline(in, line);
        std::vector<std::pair<double, double>> svm_points, rf_points;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_csv_line(line);
            auto& target = f[0] == "svm" ? svm_points : rf_points;
            target.emplace_back(parse_double(f[1], "in roc.csv"), parse_double(f[2], "in roc.csv"));
        }
        if (!svm_points.empty())
            svg::write_line_chart(dir + "/roc_svm.svg", svm_points, "ROC (SVM)", "false positive rate",
                                  "true positive rate");
        if (!rf_points.empty())
            svg::write_line_chart(dir + "/roc_rf.svg", rf_points, "ROC (random forest)", "false positive rate",
                                  "true positive rate", "#d95f02");
    } else {
        warn("roc.csv not found; skipping ROC plot");
    }

    for (const std::string model : {"svm", "rf"}) {
        const std::string name = "permutation_" + model + ".csv";
        if (!exists(name)) continue;
        std::istringstream in(read_text_file(dir + "/" + name));
        std::string line;
        std::getline(in, line);
        std::vector<double> values;
        double observed = 0.0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto f = split_csv_line(line);
            if (f[0] == "observed") observed = parse_double(f[1], "in " + name);
            else values.push_back(parse_double(f[1], "in " + name));
        }
        if (!values.empty())
            svg::write_histogram(dir + "/permutation_" + model + ".svg", values, 30, observed,
                                 "permutation test (" + model + ")", "metric value");
    }
}

}  // namespace connlatent
