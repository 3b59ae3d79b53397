#pragma once

#include "connlatent/classifier.hpp"
#include "connlatent/common.hpp"
#include "connlatent/dvae.hpp"
#include "connlatent/eval.hpp"
#include "connlatent/io.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace connlatent {

using ConfigMap = std::map<std::string, std::string>;

struct PipelineConfig {
    std::string metadata_path;
    std::string features_path;
    std::string features_kind = "matrix";  // matrix | timeseries-list
    std::string output_dir = ".";

    double test_fraction = 0.2;
    int folds = 5;

    bool harmonize = true;
    bool harmonize_age = true;
    bool harmonize_sex = true;
    std::string harmonize_fit_on = "train";  // train | all

    bool use_dvae = true;
    DvaeTrainConfig dvae;

    bool append_age = false;
    bool append_sex = false;

    GridSpec grid;

    bool run_bootstrap = false;
    int bootstrap_b = 1000;
    bool bootstrap_svm = true;
    bool bootstrap_rf = true;

    bool run_permutation = false;
    int permutation_n = 1000;
    MetricKind permutation_metric = MetricKind::accuracy;

    bool run_losocv = false;
    int min_per_class = 20;

    bool write_svg = false;

    std::uint64_t seed = 42;
    int threads = 1;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string current;
    for (char c : s) {
        if (c == ',') {
            out.push_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!trim(current).empty() || !out.empty()) out.push_back(trim(current));
    return out;
}

inline bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "off" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

inline double parse_num(const std::string& v, const std::string& key) {
    try {
        return parse_double(v, "");
    } catch (const ParseError&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
    }
}

template <class T>
std::vector<T> parse_num_list(const std::string& v, const std::string& key) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(static_cast<T>(parse_num(item, key)));
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

}  // namespace config_detail

// Flat `key = value` text: one pair per line, '#' starts a comment.
inline ConfigMap parse_config_text(const std::string& text, const std::string& source = "<config>") {
    ConfigMap map;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = config_detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + " line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = config_detail::trim(line.substr(0, eq));
        const std::string value = config_detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(source + " line " + std::to_string(line_no) + ": empty key");
        map[key] = value;
    }
    return map;
}

inline ConfigMap load_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path), path);
}

// paper-latent: ComBat with (age, sex) covariates, DVAE to 5 latent
// distributions with input noise variance 0.1, the full classifier grids,
// 80/20 split with 5-fold CV, B=1000, N=1000, LOSOCV rule >20 per class.
// paper-raw: identical but classifying raw features without the DVAE.
inline ConfigMap preset_map(const std::string& name) {
    ConfigMap m{
        {"split.test_fraction", "0.2"},
        {"split.folds", "5"},
        {"harmonize.enabled", "true"},
        {"harmonize.covariates", "age,sex"},
        {"harmonize.fit_on", "train"},
        {"dvae.enabled", "true"},
        {"dvae.epochs", "300"},
        {"dvae.batch_size", "64"},
        {"dvae.learning_rate", "0.001"},
        {"dvae.hidden_dims", "512,128"},
        {"dvae.latent_dim", "5"},
        {"dvae.noise_variance", "0.1"},
        {"covariates.append", "none"},
        {"grid.svm_c", "0.01,0.1,1,10,100"},
        {"grid.svm_gamma", "1,0.1,0.01,0.001,0.0001"},
        {"grid.svm_kernels", "linear,rbf"},
        {"grid.rf_trees", "10,50,100,500,1000"},
        {"grid.rf_depth", "1,3,5,10,20"},
        {"eval.bootstrap_b", "1000"},
        {"eval.permutation_n", "1000"},
        {"eval.min_per_class", "20"},
    };
    if (name == "paper-latent") return m;
    if (name == "paper-raw") {
        m["dvae.enabled"] = "false";
        return m;
    }
    throw ConfigError("unknown preset '" + name + "' (available: paper-latent, paper-raw)");
}

inline void merge_config(ConfigMap& base, const ConfigMap& overrides) {
    for (const auto& [k, v] : overrides) base[k] = v;
}

inline PipelineConfig config_from_map(const ConfigMap& map) {
    using namespace config_detail;
    PipelineConfig cfg;
    for (const auto& [key, value] : map) {
        if (key == "data.metadata") cfg.metadata_path = value;
        else if (key == "data.features") cfg.features_path = value;
        else if (key == "data.features_kind") {
            if (value != "matrix" && value != "timeseries-list")
                throw ConfigError("data.features_kind must be 'matrix' or 'timeseries-list'");
            cfg.features_kind = value;
        } else if (key == "output.dir") cfg.output_dir = value;
        else if (key == "split.test_fraction") cfg.test_fraction = parse_num(value, key);
        else if (key == "split.folds") cfg.folds = static_cast<int>(parse_num(value, key));
        else if (key == "harmonize.enabled") cfg.harmonize = parse_bool(value, key);
        else if (key == "harmonize.covariates") {
            cfg.harmonize_age = cfg.harmonize_sex = false;
            for (const auto& item : split_list(value)) {
                if (item == "age") cfg.harmonize_age = true;
                else if (item == "sex") cfg.harmonize_sex = true;
                else if (item == "none" || item.empty()) continue;
                else throw ConfigError("harmonize.covariates: unknown covariate '" + item + "'");
            }
        } else if (key == "harmonize.fit_on") {
            if (value != "train" && value != "all") throw ConfigError("harmonize.fit_on must be 'train' or 'all'");
            cfg.harmonize_fit_on = value;
        } else if (key == "dvae.enabled") cfg.use_dvae = parse_bool(value, key);
        else if (key == "dvae.epochs") cfg.dvae.epochs = static_cast<int>(parse_num(value, key));
        else if (key == "dvae.batch_size") cfg.dvae.batch_size = static_cast<int>(parse_num(value, key));
        else if (key == "dvae.learning_rate") cfg.dvae.learning_rate = parse_num(value, key);
        else if (key == "dvae.hidden_dims") cfg.dvae.hidden_dims = parse_num_list<Index>(value, key);
        else if (key == "dvae.latent_dim") cfg.dvae.latent_dim = static_cast<Index>(parse_num(value, key));
        else if (key == "dvae.noise_variance") cfg.dvae.noise_variance = parse_num(value, key);
        else if (key == "dvae.init_scale") cfg.dvae.init_scale = parse_num(value, key);
        else if (key == "covariates.append") {
            cfg.append_age = cfg.append_sex = false;
            for (const auto& item : split_list(value)) {
                if (item == "age") cfg.append_age = true;
                else if (item == "sex") cfg.append_sex = true;
                else if (item == "none" || item.empty()) continue;
                else throw ConfigError("covariates.append: unknown covariate '" + item + "'");
            }
        } else if (key == "grid.svm_c") cfg.grid.svm_C = parse_num_list<double>(value, key);
        else if (key == "grid.svm_gamma") cfg.grid.svm_gamma = parse_num_list<double>(value, key);
        else if (key == "grid.svm_kernels") {
            cfg.grid.svm_kernels.clear();
            for (const auto& item : split_list(value)) {
                if (item == "linear") cfg.grid.svm_kernels.push_back(Kernel::linear);
                else if (item == "rbf") cfg.grid.svm_kernels.push_back(Kernel::rbf);
                else throw ConfigError("grid.svm_kernels: unknown kernel '" + item + "'");
            }
        } else if (key == "grid.rf_trees") cfg.grid.rf_n_trees = parse_num_list<int>(value, key);
        else if (key == "grid.rf_depth") cfg.grid.rf_max_depth = parse_num_list<int>(value, key);
        else if (key == "eval.bootstrap") cfg.run_bootstrap = parse_bool(value, key);
        else if (key == "eval.bootstrap_b") cfg.bootstrap_b = static_cast<int>(parse_num(value, key));
        else if (key == "eval.bootstrap_models") {
            cfg.bootstrap_svm = cfg.bootstrap_rf = false;
            for (const auto& item : split_list(value)) {
                if (item == "svm") cfg.bootstrap_svm = true;
                else if (item == "rf") cfg.bootstrap_rf = true;
                else throw ConfigError("eval.bootstrap_models: unknown model '" + item + "'");
            }
        } else if (key == "eval.permutation") cfg.run_permutation = parse_bool(value, key);
        else if (key == "eval.permutation_n") cfg.permutation_n = static_cast<int>(parse_num(value, key));
        else if (key == "eval.permutation_metric") {
            if (value == "accuracy") cfg.permutation_metric = MetricKind::accuracy;
            else if (value == "auc") cfg.permutation_metric = MetricKind::auc;
            else throw ConfigError("eval.permutation_metric must be 'accuracy' or 'auc'");
        } else if (key == "eval.losocv") cfg.run_losocv = parse_bool(value, key);
        else if (key == "eval.min_per_class") cfg.min_per_class = static_cast<int>(parse_num(value, key));
        else if (key == "plots.svg") cfg.write_svg = parse_bool(value, key);
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_num(value, key));
        else if (key == "threads") cfg.threads = static_cast<int>(parse_num(value, key));
        else throw ConfigError("unknown configuration key '" + key + "'");
    }

    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
        throw ConfigError("split.test_fraction must be in (0,1)");
    if (cfg.folds < 2) throw ConfigError("split.folds must be at least 2");
    if (cfg.dvae.epochs < 1) throw ConfigError("dvae.epochs must be at least 1");
    if (cfg.dvae.batch_size < 1) throw ConfigError("dvae.batch_size must be at least 1");
    if (cfg.dvae.latent_dim < 1) throw ConfigError("dvae.latent_dim must be at least 1");
    if (cfg.dvae.noise_variance < 0.0) throw ConfigError("dvae.noise_variance must be nonnegative");
    if (cfg.dvae.init_scale <= 0.0) throw ConfigError("dvae.init_scale must be positive");
    if (cfg.threads < 1) throw ConfigError("threads must be at least 1");
    cfg.grid.validate();
    return cfg;
}

// Serialized form used by the run manifest; parsing it back reproduces cfg.
inline ConfigMap config_to_map(const PipelineConfig& cfg) {
    auto join_nums = [](const auto& items) {
        std::string out;
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i) out += ',';
            out += fmt_double(static_cast<double>(items[i]), 17);
        }
        return out;
    };
    ConfigMap m;
    m["data.metadata"] = cfg.metadata_path;
    m["data.features"] = cfg.features_path;
    m["data.features_kind"] = cfg.features_kind;
    m["output.dir"] = cfg.output_dir;
    m["split.test_fraction"] = fmt_double(cfg.test_fraction, 17);
    m["split.folds"] = std::to_string(cfg.folds);
    m["harmonize.enabled"] = cfg.harmonize ? "true" : "false";
    m["harmonize.covariates"] = cfg.harmonize_age && cfg.harmonize_sex ? "age,sex"
                                : cfg.harmonize_age                    ? "age"
                                : cfg.harmonize_sex                    ? "sex"
                                                                       : "none";
    m["harmonize.fit_on"] = cfg.harmonize_fit_on;
    m["dvae.enabled"] = cfg.use_dvae ? "true" : "false";
    m["dvae.epochs"] = std::to_string(cfg.dvae.epochs);
    m["dvae.batch_size"] = std::to_string(cfg.dvae.batch_size);
    m["dvae.learning_rate"] = fmt_double(cfg.dvae.learning_rate, 17);
    m["dvae.hidden_dims"] = join_nums(cfg.dvae.hidden_dims);
    m["dvae.latent_dim"] = std::to_string(cfg.dvae.latent_dim);
    m["dvae.noise_variance"] = fmt_double(cfg.dvae.noise_variance, 17);
    m["dvae.init_scale"] = fmt_double(cfg.dvae.init_scale, 17);
    m["covariates.append"] = cfg.append_age && cfg.append_sex ? "age,sex"
                             : cfg.append_age                 ? "age"
                             : cfg.append_sex                 ? "sex"
                                                              : "none";
    m["grid.svm_c"] = join_nums(cfg.grid.svm_C);
    m["grid.svm_gamma"] = join_nums(cfg.grid.svm_gamma);
    {
        std::string kernels;
        for (std::size_t i = 0; i < cfg.grid.svm_kernels.size(); ++i) {
            if (i) kernels += ',';
            kernels += kernel_name(cfg.grid.svm_kernels[i]);
        }
        m["grid.svm_kernels"] = kernels;
    }
    m["grid.rf_trees"] = join_nums(cfg.grid.rf_n_trees);
    m["grid.rf_depth"] = join_nums(cfg.grid.rf_max_depth);
    m["eval.bootstrap"] = cfg.run_bootstrap ? "true" : "false";
    m["eval.bootstrap_b"] = std::to_string(cfg.bootstrap_b);
    m["eval.bootstrap_models"] = cfg.bootstrap_svm && cfg.bootstrap_rf ? "svm,rf"
                                 : cfg.bootstrap_svm                   ? "svm"
                                                                       : "rf";
    m["eval.permutation"] = cfg.run_permutation ? "true" : "false";
    m["eval.permutation_n"] = std::to_string(cfg.permutation_n);
    m["eval.permutation_metric"] = cfg.permutation_metric == MetricKind::auc ? "auc" : "accuracy";
    m["eval.losocv"] = cfg.run_losocv ? "true" : "false";
    m["eval.min_per_class"] = std::to_string(cfg.min_per_class);
    m["plots.svg"] = cfg.write_svg ? "true" : "false";
    m["seed"] = std::to_string(cfg.seed);
    m["threads"] = std::to_string(cfg.threads);
    return m;
}

}  // namespace connlatent
