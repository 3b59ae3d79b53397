// Command-line front end for the connectivity-latent classification toolkit.

#include "connlatent/config.hpp"
#include "connlatent/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace connlatent;

int map_error_to_exit(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const TrainError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const EvalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

// preset < config file < CONNLATENT_SEED < --set
ConfigMap assemble_config(const std::string& preset, const std::string& config_file,
                          const std::vector<std::string>& overrides, const ConfigMap& extra) {
    ConfigMap map = preset_map(preset.empty() ? "paper-latent" : preset);
    if (!config_file.empty()) merge_config(map, load_config_file(config_file));
    if (const char* env_seed = std::getenv("CONNLATENT_SEED")) map["seed"] = env_seed;
    merge_config(map, extra);
    for (const auto& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
        map[config_detail::trim(item.substr(0, eq))] = config_detail::trim(item.substr(eq + 1));
    }
    return map;
}

void print_family_summary(const FamilyResult& fam) {
    if (!fam.valid) return;
    std::cout << model_name(fam.config.kind) << ": ";
    if (fam.config.kind == ModelKind::svm) {
        std::cout << kernel_name(fam.config.kernel) << " C=" << fam.config.C;
        if (fam.config.kernel == Kernel::rbf) std::cout << " gamma=" << fam.config.gamma;
    } else {
        std::cout << fam.config.n_trees << " trees, depth " << fam.config.max_depth;
    }
    std::cout << " | cv_auc=" << fmt_double(fam.cv_auc, 4) << " threshold=" << fmt_double(fam.threshold, 4)
              << " | test acc=" << fmt_double(fam.holdout.accuracy, 4)
              << " sens=" << fmt_double(fam.holdout.sensitivity, 4)
              << " spec=" << fmt_double(fam.holdout.specificity, 4)
              << " auc=" << fmt_double(fam.holdout.auc, 4) << '\n';
    for (const auto& ci : fam.bootstrap)
        std::cout << "  bootstrap " << ci.metric << " 95% CI [" << fmt_double(ci.lower, 4) << ", "
                  << fmt_double(ci.upper, 4) << "]\n";
    if (fam.has_permutation)
        std::cout << "  permutation p = " << fmt_double(fam.permutation.p_value, 6) << '\n';
}

EvalSplit split_from_files(const std::string& metadata, const std::string& features, double test_fraction,
                           int folds, std::uint64_t seed) {
    Dataset data = qc_filter(load_dataset(metadata, features));
    const SplitPlan plan = make_split(data, test_fraction, folds, seed);
    const Dataset train = data.subset(plan.train_indices);
    const Dataset test = data.subset(plan.test_indices);
    return {train.features, train.labels(), test.features, test.labels()};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"connectivity-latent feature reduction and classification toolkit"};
    app.require_subcommand(1);

    // ---- synth ----------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a synthetic multi-site dataset with planted signal");
    int s_subjects = 500, s_sites = 5, s_features = 100, s_signal = 5;
    double s_shift = 0.5, s_effect = 1.0;
    std::uint64_t s_seed = 42;
    std::string s_metadata = "metadata.csv", s_features_out = "features.bin";
    synth->add_option("--subjects", s_subjects, "number of subjects");
    synth->add_option("--sites", s_sites, "number of sites");
    synth->add_option("--features", s_features, "feature dimension");
    synth->add_option("--signal-features", s_signal, "leading features carrying the class effect");
    synth->add_option("--site-shift", s_shift, "magnitude of the per-site mean shift");
    synth->add_option("--effect-size", s_effect, "class effect added to the signal features");
    synth->add_option("--seed", s_seed, "random seed");
    synth->add_option("--metadata-out", s_metadata, "output metadata CSV");
    synth->add_option("--features-out", s_features_out, "output feature matrix (binary)");

    // ---- vectorize ------------------------------------------------------
    auto* vec = app.add_subcommand("vectorize", "Pearson-correlate ROI time series and vectorize");
    std::vector<std::string> v_inputs;
    std::string v_output = "features.bin";
    vec->add_option("inputs", v_inputs, "time-series files, one subject each (CSV or binary)")->required();
    vec->add_option("--output", v_output, "output feature matrix (binary)");

    // ---- harmonize ------------------------------------------------------
    auto* harm = app.add_subcommand("harmonize", "fit/apply ComBat site harmonization on a feature matrix");
    std::string h_metadata, h_features, h_out = "features_harmonized.bin";
    std::string h_covariates = "age,sex", h_model_out, h_apply_model;
    harm->add_option("--metadata", h_metadata, "metadata CSV")->required();
    harm->add_option("--features", h_features, "feature matrix (binary or CSV)")->required();
    harm->add_option("--adjusted-out", h_out, "output adjusted feature matrix (binary)");
    harm->add_option("--covariates", h_covariates, "covariates to preserve: age,sex | age | sex | none");
    harm->add_option("--model-out", h_model_out, "save the fitted model here");
    harm->add_option("--apply-model", h_apply_model, "apply a previously fitted model instead of fitting");

    // ---- train-dvae -----------------------------------------------------
    auto* tdv = app.add_subcommand("train-dvae", "train the denoising VAE on a feature matrix");
    std::string t_features, t_model_out = "dvae_model.bin", t_curve_out = "loss_curve.csv";
    DvaeTrainConfig t_cfg;
    std::string t_hidden = "512,128";
    tdv->add_option("--features", t_features, "training feature matrix")->required();
    tdv->add_option("--epochs", t_cfg.epochs, "training epochs");
    tdv->add_option("--batch-size", t_cfg.batch_size, "minibatch size");
    tdv->add_option("--learning-rate", t_cfg.learning_rate, "optimizer learning rate");
    tdv->add_option("--hidden", t_hidden, "encoder hidden widths, comma separated");
    tdv->add_option("--latent", t_cfg.latent_dim, "latent dimension");
    tdv->add_option("--noise-variance", t_cfg.noise_variance, "input Gaussian noise variance");
    tdv->add_option("--init-scale", t_cfg.init_scale, "weight-initialization multiplier");
    tdv->add_option("--seed", t_cfg.seed, "random seed");
    tdv->add_option("--model-out", t_model_out, "output model file");
    tdv->add_option("--curve-out", t_curve_out, "output loss-curve CSV");

    // ---- extract --------------------------------------------------------
    auto* ext = app.add_subcommand("extract", "extract latent features [mu || logvar] with a trained DVAE");
    std::string e_model, e_features, e_output = "latents.csv";
    ext->add_option("--model", e_model, "trained DVAE model file")->required();
    ext->add_option("--features", e_features, "feature matrix")->required();
    ext->add_option("--output", e_output, "output latent CSV (no header)");

    // ---- shared pipeline-style options ----------------------------------
    const auto add_pipeline_options = [](CLI::App* cmd, std::string& preset, std::string& config_file,
                                         std::vector<std::string>& sets, ConfigMap& extra) {
        cmd->add_option("--preset", preset, "configuration preset: paper-latent | paper-raw");
        cmd->add_option("--config", config_file, "key = value configuration file");
        cmd->add_option("--set", sets, "override a configuration key (key=value, repeatable)");
        cmd->add_option_function<std::string>(
            "--metadata", [&extra](const std::string& v) { extra["data.metadata"] = v; }, "metadata CSV");
        cmd->add_option_function<std::string>(
            "--features", [&extra](const std::string& v) { extra["data.features"] = v; }, "feature matrix");
        cmd->add_option_function<std::string>(
            "--output-dir", [&extra](const std::string& v) { extra["output.dir"] = v; }, "output directory");
        cmd->add_option_function<std::string>(
            "--seed", [&extra](const std::string& v) { extra["seed"] = v; }, "random seed");
        cmd->add_option_function<std::string>(
            "--threads", [&extra](const std::string& v) { extra["threads"] = v; }, "worker thread cap");
    };

    // ---- run ------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run the full pipeline");
    std::string r_preset, r_config;
    std::vector<std::string> r_sets;
    ConfigMap r_extra;
    bool r_bootstrap = false, r_permutation = false, r_losocv = false;
    add_pipeline_options(run, r_preset, r_config, r_sets, r_extra);
    run->add_flag("--bootstrap", r_bootstrap, "run the bootstrap CI stage");
    run->add_flag("--permutation", r_permutation, "run the permutation-test stage");
    run->add_flag("--losocv", r_losocv, "run leave-one-site-out cross-validation");

    // ---- classify -------------------------------------------------------
    auto* cls = app.add_subcommand("classify", "split + grid search + threshold + holdout metrics "
                                               "on a feature/latent matrix (no harmonize, no DVAE)");
    std::string c_preset, c_config;
    std::vector<std::string> c_sets;
    ConfigMap c_extra;
    add_pipeline_options(cls, c_preset, c_config, c_sets, c_extra);

    // ---- evaluate -------------------------------------------------------
    auto* evl = app.add_subcommand("evaluate", "metrics and ROC for a score,label CSV");
    std::string ev_scores, ev_roc_out;
    double ev_threshold = 0.0;
    bool ev_tune = false;
    evl->add_option("--scores", ev_scores, "CSV with two columns: score,label (no header)")->required();
    evl->add_option("--threshold", ev_threshold, "decision threshold (label = score > threshold)");
    evl->add_flag("--tune", ev_tune, "tune the threshold by geometric mean instead");
    evl->add_option("--roc-out", ev_roc_out, "write ROC points CSV here");

    // ---- losocv ---------------------------------------------------------
    auto* loso = app.add_subcommand("losocv", "leave-one-site-out cross-validation only");
    std::string l_preset, l_config;
    std::vector<std::string> l_sets;
    ConfigMap l_extra;
    add_pipeline_options(loso, l_preset, l_config, l_sets, l_extra);

    // ---- permtest / bootstrap ------------------------------------------
    const auto add_classifier_options = [](CLI::App* cmd, ClassifierConfig& cfg, std::string& kind,
                                           std::string& kernel) {
        cmd->add_option("--model", kind, "classifier: svm | rf");
        cmd->add_option("--kernel", kernel, "SVM kernel: linear | rbf");
        cmd->add_option("--c", cfg.C, "SVM regularization C");
        cmd->add_option("--gamma", cfg.gamma, "SVM rbf gamma");
        cmd->add_option("--trees", cfg.n_trees, "forest size");
        cmd->add_option("--depth", cfg.max_depth, "forest max depth");
    };

    auto* perm = app.add_subcommand("permtest", "label-permutation significance test on a feature matrix");
    std::string p_metadata, p_features, p_out;
    ClassifierConfig p_cfg{ModelKind::svm, Kernel::rbf, 1.0, 0.1, 100, 5};
    std::string p_kind = "svm", p_kernel = "rbf", p_metric = "accuracy";
    int p_n = 1000;
    double p_fraction = 0.2;
    std::uint64_t p_seed = 42;
    int p_threads = 1;
    perm->add_option("--metadata", p_metadata)->required();
    perm->add_option("--features", p_features)->required();
    add_classifier_options(perm, p_cfg, p_kind, p_kernel);
    perm->add_option("--iterations", p_n, "permutation count N");
    perm->add_option("--metric", p_metric, "accuracy | auc");
    perm->add_option("--test-fraction", p_fraction);
    perm->add_option("--seed", p_seed);
    perm->add_option("--threads", p_threads);
    perm->add_option("--histogram-out", p_out, "write iteration,metric_value CSV here");

    auto* boot = app.add_subcommand("bootstrap", "bootstrap confidence intervals on a feature matrix");
    std::string b_metadata, b_features;
    ClassifierConfig b_cfg{ModelKind::svm, Kernel::rbf, 1.0, 0.1, 100, 5};
    std::string b_kind = "svm", b_kernel = "rbf";
    int b_reps = 1000;
    double b_fraction = 0.2;
    std::uint64_t b_seed = 42;
    int b_threads = 1;
    boot->add_option("--metadata", b_metadata)->required();
    boot->add_option("--features", b_features)->required();
    add_classifier_options(boot, b_cfg, b_kind, b_kernel);
    boot->add_option("--replicates", b_reps, "bootstrap replicate count B");
    boot->add_option("--test-fraction", b_fraction);
    boot->add_option("--seed", b_seed);
    boot->add_option("--threads", b_threads);

    // ---- plots ----------------------------------------------------------
    auto* plots = app.add_subcommand("plots", "render SVG charts from a run's output directory");
    std::string pl_dir = ".";
    plots->add_option("--dir", pl_dir, "pipeline output directory");

    CLI11_PARSE(app, argc, argv);

    return map_error_to_exit([&]() -> int {
        if (*synth) {
            const Dataset d =
                synth_dataset(s_subjects, s_sites, s_features, s_signal, s_shift, s_effect, s_seed);
            save_dataset(d, s_metadata, s_features_out);
            std::cout << "wrote " << s_metadata << " and " << s_features_out << " (" << d.size()
                      << " subjects, " << d.feature_dim() << " features)\n";
            return 0;
        }
        if (*vec) {
            std::vector<Vector> rows(v_inputs.size());
            for (std::size_t i = 0; i < v_inputs.size(); ++i) {
                RoiTimeSeries ts{read_feature_matrix(v_inputs[i])};
                rows[i] = vectorize(pearson_matrix(ts));
                if (rows[i].size() != rows[0].size())
                    throw ShapeError("'" + v_inputs[i] + "' has a different ROI count");
            }
            Matrix features(static_cast<Index>(rows.size()), rows[0].size());
            for (std::size_t i = 0; i < rows.size(); ++i) features.row(static_cast<Index>(i)) = rows[i];
            write_feature_matrix_binary(v_output, features);
            std::cout << "wrote " << v_output << " (" << features.rows() << " x " << features.cols() << ")\n";
            return 0;
        }
        if (*harm) {
            const Dataset d = load_dataset(h_metadata, h_features);
            const bool use_age = h_covariates.find("age") != std::string::npos;
            const bool use_sex = h_covariates.find("sex") != std::string::npos;
            const Matrix cov = pipeline_detail::covariate_matrix(d, use_age, use_sex);
            CombatModel model;
            if (!h_apply_model.empty()) model = load_combat(h_apply_model);
            else model = combat_fit(d.features, d.sites(), cov);
            const Matrix adjusted = combat_apply(model, d.features, d.sites(), cov);
            write_feature_matrix_binary(h_out, adjusted);
            if (!h_model_out.empty()) save_combat(model, h_model_out);
            std::cout << "wrote " << h_out << '\n';
            return 0;
        }
        if (*tdv) {
            t_cfg.hidden_dims = config_detail::parse_num_list<Index>(t_hidden, "--hidden");
            const Matrix features = read_feature_matrix(t_features);
            const DvaeTrainResult result = train_dvae(features, t_cfg);
            save_dvae(result.model, t_model_out);
            write_loss_curve(t_curve_out, result.curve);
            std::cout << "final loss " << fmt_double(result.curve.back().loss, 8) << "; wrote " << t_model_out
                      << " and " << t_curve_out << '\n';
            return 0;
        }
        if (*ext) {
            const DvaeModel model = load_dvae(e_model);
            const Matrix features = read_feature_matrix(e_features);
            write_matrix_csv(e_output, extract(model, features).concat(), 17);
            std::cout << "wrote " << e_output << '\n';
            return 0;
        }
        if (*run) {
            if (r_bootstrap) r_extra["eval.bootstrap"] = "true";
            if (r_permutation) r_extra["eval.permutation"] = "true";
            if (r_losocv) r_extra["eval.losocv"] = "true";
            const PipelineConfig cfg = config_from_map(assemble_config(r_preset, r_config, r_sets, r_extra));
            const PipelineResult result = run_pipeline(cfg);
            std::cout << "pipeline complete: " << result.n_after_qc << "/" << result.n_subjects
                      << " subjects after QC, classifier input width " << result.classifier_input_dim << '\n';
            print_family_summary(result.svm);
            print_family_summary(result.rf);
            std::cout << "reports in " << cfg.output_dir << '\n';
            return 0;
        }
        if (*cls) {
            ConfigMap extra = c_extra;
            extra["harmonize.enabled"] = "false";
            extra["dvae.enabled"] = "false";
            const PipelineConfig cfg = config_from_map(assemble_config(c_preset, c_config, c_sets, extra));
            const PipelineResult result = run_pipeline(cfg);
            print_family_summary(result.svm);
            print_family_summary(result.rf);
            return 0;
        }
        if (*evl) {
            const Matrix table = read_matrix_csv(ev_scores);
            if (table.cols() != 2) throw ShapeError("--scores expects two columns: score,label");
            Vector scores = table.col(0);
            std::vector<int> labels;
            for (Index i = 0; i < table.rows(); ++i) labels.push_back(static_cast<int>(table(i, 1)));
            const double threshold = ev_tune ? tune_threshold(scores, labels) : ev_threshold;
            const Metrics m = compute_metrics(scores, labels, threshold);
            std::cout << "threshold," << fmt_double(threshold, 10) << '\n'
                      << "accuracy," << fmt_double(m.accuracy, 10) << '\n'
                      << "sensitivity," << fmt_double(m.sensitivity, 10) << '\n'
                      << "specificity," << fmt_double(m.specificity, 10) << '\n'
                      << "auc," << fmt_double(m.auc, 10) << '\n';
            if (!ev_roc_out.empty()) {
                std::ofstream out(ev_roc_out);
                out << "fpr,tpr\n";
                for (const auto& [fpr, tpr] : roc_points(scores, labels))
                    out << fmt_double(fpr, 10) << ',' << fmt_double(tpr, 10) << '\n';
            }
            return 0;
        }
        if (*loso) {
            const PipelineConfig cfg = config_from_map(assemble_config(l_preset, l_config, l_sets, l_extra));
            if (cfg.metadata_path.empty() || cfg.features_path.empty())
                throw ConfigError("losocv requires data.metadata and data.features");
            const Dataset data = qc_filter(load_dataset(cfg.metadata_path, cfg.features_path));
            const LosocvResult result = losocv_run(data, cfg);
            std::filesystem::create_directories(cfg.output_dir);
            std::ofstream out(cfg.output_dir + "/losocv_metrics.csv");
            out << "protocol,model,metric,value,ci_lower,ci_upper,p_value\n";
            for (const auto& site : result.per_site) {
                pipeline_detail::append_metric_rows(out, "losocv_site_" + std::to_string(site.site), "svm",
                                                    site.svm);
                pipeline_detail::append_metric_rows(out, "losocv_site_" + std::to_string(site.site), "rf",
                                                    site.rf);
            }
            pipeline_detail::append_metric_rows(out, "losocv_avg", "svm", result.svm_average);
            pipeline_detail::append_metric_rows(out, "losocv_avg", "rf", result.rf_average);
            for (const auto& site : result.per_site)
                std::cout << "site " << site.site << ": svm acc " << fmt_double(site.svm.accuracy, 4)
                          << ", rf acc " << fmt_double(site.rf.accuracy, 4) << '\n';
            std::cout << "avg: svm acc " << fmt_double(result.svm_average.accuracy, 4) << ", rf acc "
                      << fmt_double(result.rf_average.accuracy, 4) << '\n';
            return 0;
        }
        if (*perm) {
            p_cfg.kind = p_kind == "rf" ? ModelKind::rf : ModelKind::svm;
            p_cfg.kernel = p_kernel == "linear" ? Kernel::linear : Kernel::rbf;
            const EvalSplit split = split_from_files(p_metadata, p_features, p_fraction, 5, p_seed);
            const MetricKind metric = p_metric == "auc" ? MetricKind::auc : MetricKind::accuracy;
            const PermutationResult result =
                permutation_test(split, p_cfg, p_n, derive_seed(p_seed, 107), metric, p_threads);
            std::cout << "observed " << p_metric << " = " << fmt_double(result.observed, 6)
                      << ", p = " << fmt_double(result.p_value, 8) << " (" << p_n << " iterations)\n";
            if (!p_out.empty()) {
                std::ofstream out(p_out);
                out << "iteration,metric_value\n";
                for (std::size_t i = 0; i < result.permuted.size(); ++i)
                    out << i << ',' << fmt_double(result.permuted[i], 10) << '\n';
                out << "observed," << fmt_double(result.observed, 10) << '\n';
            }
            return 0;
        }
        if (*boot) {
            b_cfg.kind = b_kind == "rf" ? ModelKind::rf : ModelKind::svm;
            b_cfg.kernel = b_kernel == "linear" ? Kernel::linear : Kernel::rbf;
            const EvalSplit split = split_from_files(b_metadata, b_features, b_fraction, 5, b_seed);
            TrainedClassifier model = fit_classifier(b_cfg, split.x_train, split.y_train,
                                                     derive_seed(b_seed, 105), b_threads);
            model.threshold = tune_threshold(
                cross_val_scores(split.x_train, split.y_train, b_cfg, 5, derive_seed(b_seed, 102), b_threads),
                split.y_train);
            const Metrics point =
                compute_metrics(classifier_scores(model, split.x_test), split.y_test, model.threshold);
            const auto cis =
                bootstrap_ci(split, b_cfg, point, b_reps, derive_seed(b_seed, 103), b_threads);
            for (const auto& ci : cis)
                std::cout << ci.metric << ": point " << fmt_double(ci.point, 4) << ", 95% CI ["
                          << fmt_double(ci.lower, 4) << ", " << fmt_double(ci.upper, 4) << "] (B=" << b_reps
                          << ")\n";
            return 0;
        }
        if (*plots) {
            emit_plots(pl_dir, true);
            std::cout << "plots written to " << pl_dir << '\n';
            return 0;
        }
        return 0;
    });
}
