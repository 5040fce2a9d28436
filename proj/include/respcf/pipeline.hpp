#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "respcf/cfe.hpp"
#include "respcf/curves.hpp"
#include "respcf/dataset.hpp"
#include "respcf/explain.hpp"
#include "respcf/fpca.hpp"
#include "respcf/parallel.hpp"
#include "respcf/regressor.hpp"

namespace respcf {
namespace pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

struct SyntheticSource {
    std::size_t count = 10000;
    std::uint64_t seed = 1234;
    double noise_stddev = 0.0;
};

struct CsvSource {
    std::string path;
    std::string target_column = "y";
    std::string schema_path;  // optional sidecar JSON
};

// Full experiment configuration.  Everything an output file depends on is
// in here, so a saved config (the manifest echo) reproduces the run.
struct RunConfig {
    std::optional<SyntheticSource> synthetic = SyntheticSource{};
    std::optional<CsvSource> csv;
    std::string active_feature = "x1";
    std::vector<double> epsilons{0.4, 0.6, 0.8};
    int folds = 10;
    std::size_t grid_size = 100;
    RegressorConfig regressor;
    cfe::NsgaConfig nsga;
    std::string out_dir = "out";
    std::uint64_t base_seed = 42;
    int threads = 0;                  // 0 = all hardware threads
    std::size_t cfe_sample_limit = 0; // 0 = run CFE for every sample
    bool exclude_failures = false;    // drop failed searches from global stats
    std::size_t top_k = 5;
    bool write_curves = false;        // per-fold curve dumps are large
    std::size_t fpca_components = 3;

    void validate() const {
        if (synthetic.has_value() == csv.has_value())
            throw std::invalid_argument("config must select exactly one dataset source");
        if (epsilons.empty()) throw std::invalid_argument("at least one epsilon required");
        for (const double eps : epsilons)
            if (!(eps > 0.0)) throw std::invalid_argument("epsilon values must be positive");
        if (folds < 2) throw std::invalid_argument("folds must be >= 2");
        if (grid_size < 2) throw std::invalid_argument("grid size must be >= 2");
        if (fpca_components < 1) throw std::invalid_argument("fpca components must be >= 1");
        regressor.validate();
        nsga.validate();
    }
};

inline void to_json(nlohmann::json& j, const RunConfig& config) {
    if (config.synthetic) {
        j["source"] = {{"type", "synthetic"},
                       {"count", config.synthetic->count},
                       {"seed", config.synthetic->seed},
                       {"noise_stddev", config.synthetic->noise_stddev}};
    } else if (config.csv) {
        j["source"] = {{"type", "csv"},
                       {"path", config.csv->path},
                       {"target_column", config.csv->target_column},
                       {"schema_path", config.csv->schema_path}};
    }
    j["active_feature"] = config.active_feature;
    j["epsilons"] = config.epsilons;
    j["folds"] = config.folds;
    j["grid_size"] = config.grid_size;
    j["regressor"] = {{"hidden_layers", config.regressor.hidden_layers},
                      {"activation", activation_name(config.regressor.activation)},
                      {"epochs", config.regressor.epochs},
                      {"batch_size", config.regressor.batch_size},
                      {"learning_rate", config.regressor.learning_rate}};
    j["nsga"] = {{"population_size", config.nsga.population_size},
                 {"generations", config.nsga.generations},
                 {"crossover_prob", config.nsga.crossover_prob},
                 {"mutation_prob", config.nsga.mutation_prob},
                 {"reset_prob", config.nsga.reset_prob},
                 {"crossover_eta", config.nsga.crossover_eta},
                 {"mutation_eta", config.nsga.mutation_eta}};
    j["out_dir"] = config.out_dir;
    j["base_seed"] = config.base_seed;
    j["cfe_sample_limit"] = config.cfe_sample_limit;
    j["exclude_failures"] = config.exclude_failures;
    j["top_k"] = config.top_k;
    j["write_curves"] = config.write_curves;
    j["fpca_components"] = config.fpca_components;
}

inline void from_json(const nlohmann::json& j, RunConfig& config) {
    if (j.contains("source")) {
        const auto& src = j.at("source");
        const auto type = src.at("type").get<std::string>();
        if (type == "synthetic") {
            SyntheticSource s;
            s.count = src.value("count", s.count);
            s.seed = src.value("seed", s.seed);
            s.noise_stddev = src.value("noise_stddev", s.noise_stddev);
            config.synthetic = s;
            config.csv.reset();
        } else if (type == "csv") {
            CsvSource s;
            s.path = src.at("path").get<std::string>();
            s.target_column = src.value("target_column", s.target_column);
            s.schema_path = src.value("schema_path", s.schema_path);
            config.csv = s;
            config.synthetic.reset();
        } else {
            throw std::invalid_argument("unknown source type: " + type);
        }
    }
    config.active_feature = j.value("active_feature", config.active_feature);
    config.epsilons = j.value("epsilons", config.epsilons);
    config.folds = j.value("folds", config.folds);
    config.grid_size = j.value("grid_size", config.grid_size);
    if (j.contains("regressor")) {
        const auto& r = j.at("regressor");
        config.regressor.hidden_layers = r.value("hidden_layers", config.regressor.hidden_layers);
        if (r.contains("activation"))
            config.regressor.activation = activation_from_name(r.at("activation"));
        config.regressor.epochs = r.value("epochs", config.regressor.epochs);
        config.regressor.batch_size = r.value("batch_size", config.regressor.batch_size);
        config.regressor.learning_rate = r.value("learning_rate", config.regressor.learning_rate);
    }
    if (j.contains("nsga")) {
        const auto& n = j.at("nsga");
        config.nsga.population_size = n.value("population_size", config.nsga.population_size);
        config.nsga.generations = n.value("generations", config.nsga.generations);
        config.nsga.crossover_prob = n.value("crossover_prob", config.nsga.crossover_prob);
        config.nsga.mutation_prob = n.value("mutation_prob", config.nsga.mutation_prob);
        config.nsga.reset_prob = n.value("reset_prob", config.nsga.reset_prob);
        config.nsga.crossover_eta = n.value("crossover_eta", config.nsga.crossover_eta);
        config.nsga.mutation_eta = n.value("mutation_eta", config.nsga.mutation_eta);
    }
    config.out_dir = j.value("out_dir", config.out_dir);
    config.base_seed = j.value("base_seed", config.base_seed);
    config.threads = j.value("threads", config.threads);
    config.cfe_sample_limit = j.value("cfe_sample_limit", config.cfe_sample_limit);
    config.exclude_failures = j.value("exclude_failures", config.exclude_failures);
    config.top_k = j.value("top_k", config.top_k);
    config.write_curves = j.value("write_curves", config.write_curves);
    config.fpca_components = j.value("fpca_components", config.fpca_components);
}

inline Dataset load_source(const RunConfig& config) {
    if (config.synthetic)
        return generate_synthetic(config.synthetic->count, config.synthetic->seed,
                                  config.synthetic->noise_stddev);
    ColumnKinds kinds;
    if (!config.csv->schema_path.empty()) {
        std::ifstream in(config.csv->schema_path);
        if (!in) throw std::runtime_error("cannot open schema file: " + config.csv->schema_path);
        nlohmann::json j;
        in >> j;
        for (const auto& [column, entry] : j.items()) {
            const auto kind = entry.at("kind").get<std::string>();
            if (kind == "categorical")
                kinds[column] = FeatureKind::categorical;
            else if (kind == "numeric")
                kinds[column] = FeatureKind::numeric;
            else
                throw std::invalid_argument("unknown column kind '" + kind + "' for " + column);
        }
    }
    return load_csv(config.csv->path, config.csv->target_column, kinds);
}

namespace detail {

inline std::string format_eps(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", eps);
    return buf;
}

// seed streams hanging off base_seed
inline constexpr std::uint64_t kStreamKfold = 100;
inline constexpr std::uint64_t kStreamTrain = 200;  // + fold
inline constexpr std::uint64_t kStreamCfe = 300;    // + fold, eps index

inline nlohmann::json cfe_record(const Dataset& normalized, const Dataset& raw,
                                 const NormalizationParams& params,
                                 const explain::LocalExplanation& local,
                                 const cfe::CfeResult& result) {
    nlohmann::json record;
    record["sample_index"] = result.sample_index;
    record["epsilon"] = result.epsilon;
    record["success"] = result.success;
    record["distance"] = result.achieved_distance;
    nlohmann::json alpha = nlohmann::json::array();
    for (const std::size_t i : local.alpha) alpha.push_back(normalized.specs[i].name);
    record["alpha"] = std::move(alpha);
    nlohmann::json counterfactual;
    const Sample denorm = denormalize_sample(result.counterfactual, params);
    for (std::size_t i = 0; i < raw.n_features(); ++i) {
        const FeatureSpec& spec = raw.specs[i];
        if (spec.kind == FeatureKind::categorical)
            counterfactual[spec.name] =
                spec.levels.at(static_cast<std::size_t>(denorm.features[i]));
        else
            counterfactual[spec.name] = denorm.features[i];
    }
    record["counterfactual"] = std::move(counterfactual);
    record["front_size"] = result.pareto_front.size();
    return record;
}

}  // namespace detail

struct FoldOutcome {
    int fold_id = 0;
    double validation_mse = 0.0;
    double fpca_cumulative_explained = 0.0;
    double train_seconds = 0.0;
    // locals per epsilon, in epsilon-list order
    std::vector<std::vector<explain::LocalExplanation>> locals_per_eps;
    std::vector<explain::GlobalReport> report_per_eps;
};

struct PipelineResult {
    std::vector<FoldOutcome> folds;
    std::vector<explain::GlobalReport> aggregated;  // one per epsilon
    nlohmann::json manifest;
    std::vector<std::string> report_files;
};

// Writes the per-epsilon global report as JSON.
inline nlohmann::json report_json(const explain::GlobalReport& report,
                                  const std::vector<FeatureSpec>& specs,
                                  std::size_t active_index) {
    nlohmann::json j;
    j["epsilon"] = report.epsilon;
    j["folds"] = report.fold_count;
    j["fold_sample_counts"] = report.fold_sample_counts;
    nlohmann::json relevance;
    for (std::size_t i = 0; i < report.n_features; ++i) {
        if (i == active_index) continue;
        relevance[specs[i].name] = {{"mean", report.relevance_mean[i]},
                                    {"std", report.relevance_std[i]},
                                    {"per_fold", [&] {
                                         std::vector<double> values;
                                         for (const auto& rel : report.per_fold_relevance)
                                             values.push_back(rel[i]);
                                         return values;
                                     }()}};
    }
    j["relevance"] = std::move(relevance);
    const auto combos_json = [&](const std::vector<explain::GlobalReport::Combination>& combos) {
        nlohmann::json out = nlohmann::json::array();
        for (const auto& combo : combos) {
            nlohmann::json entry;
            nlohmann::json names = nlohmann::json::array();
            for (const std::size_t i : combo.features) names.push_back(specs[i].name);
            entry["features"] = std::move(names);
            entry["total_count"] = combo.total_count;
            entry["mean_pct"] = 100.0 * combo.mean_ratio;
            entry["std_pct"] = 100.0 * combo.std_ratio;
            out.push_back(std::move(entry));
        }
        return out;
    };
    j["combinations"] = combos_json(report.combinations);
    j["interaction_combinations"] = combos_json(report.interaction_combinations);
    return j;
}

inline void write_report_csv(const std::string& path,
                             const std::vector<explain::GlobalReport>& reports,
                             const std::vector<FeatureSpec>& specs, std::size_t active_index) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report csv: " + path);
    out << "epsilon,record,name,mean,std\n";
    out.precision(12);
    for (const auto& report : reports) {
        for (std::size_t i = 0; i < report.n_features; ++i) {
            if (i == active_index) continue;
            out << report.epsilon << ",relevance," << csv_escape(specs[i].name) << ','
                << report.relevance_mean[i] << ',' << report.relevance_std[i] << '\n';
        }
        for (const auto& combo : report.combinations) {
            std::string name;
            for (const std::size_t i : combo.features) {
                if (!name.empty()) name += '+';
                name += specs[i].name;
            }
            out << report.epsilon << ",combination," << csv_escape(name) << ','
                << combo.mean_ratio << ',' << combo.std_ratio << '\n';
        }
    }
}

inline void write_curves_csv(const std::string& path, const CurveSet& set,
                             const NormalizationParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write curves csv: " + path);
    out << "sample_index,grid_value,response\n";
    out.precision(17);
    for (const auto& curve : set.curves)
        for (std::size_t g = 0; g < set.grid.size(); ++g)
            out << curve.sample_index << ','
                << params.denormalize_value(set.grid.active_index, set.grid.values[g]) << ','
                << curve.values[g] << '\n';
}

// Runs the full cross-validated pipeline: per fold, train the network,
// build the aligned curve set and fPCA basis, search counterfactuals for
// every selected sample at every epsilon, dump per-fold records, then
// aggregate global explanations per epsilon and write the manifest.
inline PipelineResult run_pipeline(const RunConfig& config, bool quiet = false) {
    config.validate();
    const auto log = [&](const std::string& line) {
        if (!quiet) std::fprintf(stderr, "%s\n", line.c_str());
    };

    std::filesystem::create_directories(config.out_dir);
    const auto out_path = [&](const std::string& name) {
        return (std::filesystem::path(config.out_dir) / name).string();
    };

    Dataset raw = load_source(config);
    const std::size_t active = raw.feature_index(config.active_feature);
    raw.active_index = active;
    const std::size_t n_samples = raw.size();
    const std::size_t cfe_count = (config.cfe_sample_limit == 0)
                                      ? n_samples
                                      : std::min(config.cfe_sample_limit, n_samples);

    const auto folds = kfold_split(raw, config.folds,
                                   derive_seed(config.base_seed, detail::kStreamKfold));

    PipelineResult result;
    std::vector<std::string> files;

    for (std::size_t f = 0; f < folds.size(); ++f) {
        FoldOutcome outcome;
        outcome.fold_id = folds[f].fold_id;

        Dataset train_raw = raw.subset(folds[f].train_indices);
        train_raw.specs = infer_specs(train_raw);
        const auto [train_norm, params] = normalize(train_raw);
        const Dataset val_norm =
            apply_normalization(raw.subset(folds[f].validation_indices), params);

        RegressorConfig reg = config.regressor;
        reg.seed = derive_seed(config.base_seed, detail::kStreamTrain + f);
        auto [model, report] = train(train_norm, val_norm, reg);
        outcome.validation_mse = report.validation_mse;
        outcome.train_seconds = report.seconds;
        model.normalization = params;
        log("fold " + std::to_string(folds[f].fold_id) + ": validation mse " +
            std::to_string(report.validation_mse) + " (" + std::to_string(report.seconds) +
            "s)");

        Dataset full = raw;
        full.specs = train_raw.specs;
        const Dataset full_norm = apply_normalization(full, params);
        const CurveGrid grid = make_grid(full_norm, active, config.grid_size);
        const CurveSet curves = curve_set(model, full_norm, grid);
        const FpcaModel fpca_model = fpca::fit(curves, config.fpca_components);
        outcome.fpca_cumulative_explained = fpca_model.cumulative_explained;
        if (fpca_model.low_variance_warning)
            log("fold " + std::to_string(folds[f].fold_id) +
                ": warning: fPCA explains only " +
                std::to_string(100.0 * fpca_model.cumulative_explained) + "% of curve variance");

        const std::string fold_tag = "fold" + std::to_string(folds[f].fold_id);
        model.save(out_path("model_" + fold_tag + ".json"));
        fpca_model.save(out_path("fpca_" + fold_tag + ".json"));
        files.push_back("model_" + fold_tag + ".json");
        files.push_back("fpca_" + fold_tag + ".json");
        if (config.write_curves) {
            const std::string name = "curves_" + fold_tag + ".csv";
            write_curves_csv(out_path(name), curves, params);
            files.push_back(name);
        }

        for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
            const double eps = config.epsilons[e];
            cfe::NsgaConfig nsga = config.nsga;
            nsga.seed = derive_seed(config.base_seed, detail::kStreamCfe + f, e);

            std::vector<cfe::CfeResult> cfe_results(cfe_count);
            parallel_for(0, cfe_count, config.threads, [&](std::size_t j) {
                try {
                    cfe_results[j] =
                        cfe::generate_cfe(model, fpca_model, grid, full_norm, j, eps, nsga);
                } catch (const std::exception& ex) {
                    throw std::runtime_error("fold " + std::to_string(folds[f].fold_id) +
                                             ", sample " + std::to_string(j) + ", epsilon " +
                                             detail::format_eps(eps) + ": " + ex.what());
                }
            });

            std::vector<explain::LocalExplanation> locals;
            locals.reserve(cfe_count);
            const std::string dump_name =
                "cfe_" + fold_tag + "_eps" + detail::format_eps(eps) + ".jsonl";
            std::ofstream dump(out_path(dump_name), std::ios::binary);
            if (!dump) throw std::runtime_error("cannot write " + dump_name);
            for (std::size_t j = 0; j < cfe_count; ++j) {
                const auto local = explain::local_explanation(full_norm.samples[j],
                                                              cfe_results[j], active);
                dump << detail::cfe_record(full_norm, full, params, local, cfe_results[j])
                            .dump()
                     << '\n';
                locals.push_back(local);
            }
            files.push_back(dump_name);

            std::vector<explain::LocalExplanation> counted;
            if (config.exclude_failures) {
                for (const auto& local : locals)
                    if (local.success) counted.push_back(local);
            } else {
                counted = locals;
            }
            if (counted.empty())
                throw std::runtime_error("fold " + std::to_string(folds[f].fold_id) +
                                         ": no explanations to aggregate at epsilon " +
                                         detail::format_eps(eps));
            outcome.report_per_eps.push_back(
                explain::fold_report(counted, eps, raw.n_features(), config.top_k));
            outcome.locals_per_eps.push_back(std::move(locals));

            std::size_t successes = 0;
            for (const auto& local : outcome.locals_per_eps.back())
                if (local.success) ++successes;
            log("fold " + std::to_string(folds[f].fold_id) + ", eps " + detail::format_eps(eps) +
                ": " + std::to_string(successes) + "/" + std::to_string(cfe_count) +
                " successful CFEs");
        }
        result.folds.push_back(std::move(outcome));
    }

    // cross-fold aggregation, one report per epsilon
    for (std::size_t e = 0; e < config.epsilons.size(); ++e) {
        std::vector<explain::GlobalReport> fold_reports;
        fold_reports.reserve(result.folds.size());
        for (const auto& outcome : result.folds) fold_reports.push_back(outcome.report_per_eps[e]);
        explain::GlobalReport aggregated = explain::aggregate_folds(fold_reports, config.top_k);
        const std::string name = "report_eps" + detail::format_eps(config.epsilons[e]) + ".json";
        {
            std::ofstream out(out_path(name), std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + name);
            out << report_json(aggregated, raw.specs, active).dump(2) << '\n';
        }
        files.push_back(name);
        result.report_files.push_back(out_path(name));
        result.aggregated.push_back(std::move(aggregated));
    }
    write_report_csv(out_path("report.csv"), result.aggregated, raw.specs, active);
    files.push_back("report.csv");

    nlohmann::json manifest;
    manifest["tool"] = "respcf";
    manifest["version"] = kToolVersion;
    manifest["config"] = config;
    manifest["n_samples"] = n_samples;
    manifest["n_features"] = raw.n_features();
    manifest["feature_names"] = [&] {
        std::vector<std::string> names;
        for (const auto& spec : raw.specs) names.push_back(spec.name);
        return names;
    }();
    manifest["active_feature"] = config.active_feature;
    manifest["cfe_samples"] = cfe_count;
    nlohmann::json fold_info = nlohmann::json::array();
    for (const auto& outcome : result.folds)
        fold_info.push_back({{"fold_id", outcome.fold_id},
                             {"validation_mse", outcome.validation_mse},
                             {"fpca_cumulative_explained", outcome.fpca_cumulative_explained}});
    manifest["folds"] = std::move(fold_info);
    manifest["files"] = files;
    {
        std::ofstream out(out_path("manifest.json"), std::ios::binary);
        if (!out) throw std::runtime_error("cannot write manifest.json");
        out << manifest.dump(2) << '\n';
    }
    result.manifest = std::move(manifest);
    return result;
}

// Rebuilds the aggregated per-epsilon reports from per-fold CFE dumps
// (the `report` subcommand).
inline std::vector<explain::GlobalReport> reaggregate_from_dumps(
    const std::vector<std::string>& dump_paths, const std::vector<std::string>& feature_names,
    std::size_t top_k, bool exclude_failures) {
    // epsilon -> fold dumps -> locals
    std::map<double, std::vector<std::vector<explain::LocalExplanation>>> grouped;
    std::map<std::string, std::size_t> name_to_index;
    for (std::size_t i = 0; i < feature_names.size(); ++i) name_to_index[feature_names[i]] = i;

    for (const auto& path : dump_paths) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open cfe dump: " + path);
        std::map<double, std::vector<explain::LocalExplanation>> by_eps;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const nlohmann::json record = nlohmann::json::parse(line);
            explain::LocalExplanation local;
            local.sample_index = record.at("sample_index").get<std::size_t>();
            local.epsilon = record.at("epsilon").get<double>();
            local.success = record.at("success").get<bool>();
            for (const auto& name : record.at("alpha")) {
                const auto it = name_to_index.find(name.get<std::string>());
                if (it == name_to_index.end())
                    throw std::runtime_error("unknown feature '" + name.get<std::string>() +
                                             "' in " + path);
                local.alpha.push_back(it->second);
            }
            std::sort(local.alpha.begin(), local.alpha.end());
            if (exclude_failures && !local.success) continue;
            by_eps[local.epsilon].push_back(std::move(local));
        }
        for (auto& [eps, locals] : by_eps) grouped[eps].push_back(std::move(locals));
    }

    std::vector<explain::GlobalReport> reports;
    for (auto& [eps, folds] : grouped) {
        std::vector<explain::GlobalReport> fold_reports;
        for (auto& locals : folds)
            fold_reports.push_back(
                explain::fold_report(locals, eps, feature_names.size(), top_k));
        reports.push_back(explain::aggregate_folds(fold_reports, top_k));
    }
    return reports;
}

}  // namespace pipeline
}  // namespace respcf
